"""Analytic, resolution-independent construction of closure stimuli.

Everything here works in continuous pixel coordinates: origin at the
top-left corner of the canvas, x to the right, y downward. Angles are
degrees throughout the public interface; a rotation by +90 degrees maps
(1, 0) to (0, 1) in this y-down frame.

Shapes are assembled into :class:`SceneGraph` objects (stroked polylines
and filled incomplete disks) which the rasterizer turns into images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

Point = tuple[float, float]

TRIANGLE_SIDE = 116.0
SQUARE_SIDE = 95.0
TRIANGLE_MOUTH_DEG = 60.0
SQUARE_MOUTH_DEG = 90.0

EXP2_GROUPS = ("base_a", "base_b", "composite_a", "composite_b")


# ---------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class TriangleSpec:
    """Equilateral triangle: all pairwise vertex distances equal `side`."""

    center: Point
    theta_global: float = 0.0
    side: float = TRIANGLE_SIDE


@dataclass(frozen=True)
class SquareSpec:
    """Square with neighboring vertices `side` apart."""

    center: Point
    theta_global: float = 0.0
    side: float = SQUARE_SIDE


@dataclass(frozen=True)
class FragmentSpec:
    """V- or L-shaped corner fragment: two arms along the incident sides.

    `pivot` selects what `local_rotation` turns the fragment around:
    the corner vertex itself, or the fragment's stroke centroid (which
    keeps centroid-to-centroid spacing between components fixed).
    """

    vertex: Point
    arm_a_dir: Point
    arm_b_dir: Point
    edge_length: float
    local_rotation: float = 0.0
    pivot: str = "vertex"  # "vertex" | "centroid"


@dataclass(frozen=True)
class PacmanSpec:
    """Filled disk with a wedge ("mouth") of `mouth_angle` degrees removed.

    `mouth_bisector` is the absolute direction of the wedge center;
    `local_rotation` turns the mouth around the disk center. For a valid
    illusory figure the bisector points at the figure centroid and
    local_rotation is 0.
    """

    center: Point
    radius: float
    mouth_angle: float
    mouth_bisector: float
    local_rotation: float = 0.0


# ---------------------------------------------------------------------------
# Scene graph


@dataclass(frozen=True)
class Polyline:
    """Open or closed stroked path through `points` in order."""

    points: tuple[Point, ...]


@dataclass(frozen=True)
class Pacman:
    """Resolved incomplete disk ready for rasterization."""

    center: Point
    radius: float
    mouth_angle: float
    mouth_bisector: float


@dataclass(frozen=True)
class SceneGraph:
    """Ordered shapes over a uniform background; foreground is its inverse."""

    shapes: tuple = ()
    stroke_width: float = 2.0
    background: str = "white"  # "white" | "black"


# ---------------------------------------------------------------------------
# Elementary operations


def rotate_about(points: list[Point], pivot: Point, angle_deg: float) -> list[Point]:
    """Rigid rotation of `points` around `pivot`; distances are preserved."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    px, py = pivot
    out = []
    for x, y in points:
        dx, dy = x - px, y - py
        out.append((px + c * dx - s * dy, py + s * dx + c * dy))
    return out


def _unit(dx: float, dy: float) -> Point:
    n = math.hypot(dx, dy)
    return (dx / n, dy / n)


def triangle_vertices(spec: TriangleSpec) -> list[Point]:
    """The three vertices, one pointing straight up before theta_global.

    Vertices lie on the circumcircle of radius side/sqrt(3) about the
    center; the unrotated pose puts vertex 0 at the top of the canvas.
    """
    r = spec.side / math.sqrt(3.0)
    cx, cy = spec.center
    base = []
    for k in range(3):
        phi = math.radians(-90.0 + 120.0 * k)
        base.append((cx + r * math.cos(phi), cy + r * math.sin(phi)))
    return rotate_about(base, spec.center, spec.theta_global)


def square_vertices(spec: SquareSpec) -> list[Point]:
    """The four corners, axis-aligned sides before theta_global."""
    r = spec.side / math.sqrt(2.0)
    cx, cy = spec.center
    base = []
    for k in range(4):
        phi = math.radians(-45.0 + 90.0 * k)
        base.append((cx + r * math.cos(phi), cy + r * math.sin(phi)))
    return rotate_about(base, spec.center, spec.theta_global)


def _corner_fragments(
    vertices: list[Point],
    edge_length: float,
    local_rotation: float,
    pivot: str,
) -> list[FragmentSpec]:
    n = len(vertices)
    frags = []
    for i, v in enumerate(vertices):
        prev_v = vertices[(i - 1) % n]
        next_v = vertices[(i + 1) % n]
        frags.append(
            FragmentSpec(
                vertex=v,
                arm_a_dir=_unit(prev_v[0] - v[0], prev_v[1] - v[1]),
                arm_b_dir=_unit(next_v[0] - v[0], next_v[1] - v[1]),
                edge_length=edge_length,
                local_rotation=local_rotation,
                pivot=pivot,
            )
        )
    return frags


def triangle_fragments(
    spec: TriangleSpec, edge_length: float, theta_local: float = 0.0
) -> list[FragmentSpec]:
    """One V-shaped fragment per vertex, arms along the incident sides.

    Fragments rotate around their own corner vertex, so a nonzero
    theta_local destroys alignment while keeping vertex positions.
    """
    if edge_length <= 0:
        raise ValueError(f"edge_length must be positive, got {edge_length}")
    if 2.0 * edge_length > spec.side:
        raise ValueError(
            f"edge_length {edge_length} exceeds side/2 = {spec.side / 2}: "
            "arms would overlap mid-side"
        )
    return _corner_fragments(triangle_vertices(spec), edge_length, theta_local, "vertex")


def square_components(
    center: Point,
    theta_global: float,
    side: float = SQUARE_SIDE,
    edge_length: float = 19.0,
) -> list[FragmentSpec]:
    """Four L-shaped corner fragments of a square.

    These pivot on their stroke centroid, so rotating any component in
    place preserves the centroid spacing between neighbors.
    """
    if edge_length <= 0:
        raise ValueError(f"edge_length must be positive, got {edge_length}")
    if 2.0 * edge_length >= side:
        raise ValueError(
            f"edge_length {edge_length} must be below side/2 = {side / 2}"
        )
    verts = square_vertices(SquareSpec(center=center, theta_global=theta_global, side=side))
    return _corner_fragments(verts, edge_length, 0.0, "centroid")


def fragment_centroid(spec: FragmentSpec) -> Point:
    """Stroke (arc-length) centroid of the unrotated fragment."""
    vx, vy = spec.vertex
    e4 = spec.edge_length / 4.0
    return (
        vx + e4 * (spec.arm_a_dir[0] + spec.arm_b_dir[0]),
        vy + e4 * (spec.arm_a_dir[1] + spec.arm_b_dir[1]),
    )


def fragment_polyline(spec: FragmentSpec) -> Polyline:
    """Resolve a fragment to its stroked path, applying local_rotation."""
    vx, vy = spec.vertex
    e = spec.edge_length
    pts = [
        (vx + e * spec.arm_a_dir[0], vy + e * spec.arm_a_dir[1]),
        (vx, vy),
        (vx + e * spec.arm_b_dir[0], vy + e * spec.arm_b_dir[1]),
    ]
    if spec.local_rotation != 0.0:
        pivot = spec.vertex if spec.pivot == "vertex" else fragment_centroid(spec)
        pts = rotate_about(pts, pivot, spec.local_rotation)
    return Polyline(points=tuple(pts))


def kanizsa_pacmen(
    spec: TriangleSpec | SquareSpec,
    radius: float = 20.0,
    theta_local: float = 0.0,
) -> list[PacmanSpec]:
    """One incomplete disk per figure vertex, mouth wedge matching the
    interior angle. theta_local = 0 aims every mouth at the centroid
    (valid figure); anything else rotates the mouth in place (invalid).
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if isinstance(spec, TriangleSpec):
        verts = triangle_vertices(spec)
        mouth = TRIANGLE_MOUTH_DEG
    else:
        verts = square_vertices(spec)
        mouth = SQUARE_MOUTH_DEG
    min_dist = min(
        math.dist(verts[i], verts[j])
        for i in range(len(verts))
        for j in range(i + 1, len(verts))
    )
    if radius >= min_dist / 2.0:
        raise ValueError(
            f"radius {radius} >= half the minimum inter-vertex distance "
            f"{min_dist / 2}: disks would touch"
        )
    cx, cy = spec.center
    out = []
    for vx, vy in verts:
        bisector = math.degrees(math.atan2(cy - vy, cx - vx))
        out.append(
            PacmanSpec(
                center=(vx, vy),
                radius=radius,
                mouth_angle=mouth,
                mouth_bisector=bisector,
                local_rotation=theta_local,
            )
        )
    return out


def resolve_pacman(spec: PacmanSpec) -> Pacman:
    return Pacman(
        center=spec.center,
        radius=spec.radius,
        mouth_angle=spec.mouth_angle,
        mouth_bisector=spec.mouth_bisector + spec.local_rotation,
    )


def removal_fraction(edge_length: float, side: float) -> float:
    """Fraction of a side left uncovered by the two incident arms."""
    if not (0.0 < 2.0 * edge_length < side):
        raise ValueError(
            f"need 0 < 2*edge_length < side, got edge_length={edge_length}, side={side}"
        )
    return (side - 2.0 * edge_length) / side


# ---------------------------------------------------------------------------
# Scene builders for the four stimulus families


def complete_triangle_scene(
    spec: TriangleSpec, stroke_width: float = 2.0, background: str = "white"
) -> SceneGraph:
    v = triangle_vertices(spec)
    outline = Polyline(points=(v[0], v[1], v[2], v[0]))
    return SceneGraph(shapes=(outline,), stroke_width=stroke_width, background=background)


def triangle_fragment_scene(
    spec: TriangleSpec,
    edge_length: float,
    theta_local: float = 0.0,
    stroke_width: float = 2.0,
    background: str = "white",
) -> SceneGraph:
    frags = triangle_fragments(spec, edge_length, theta_local)
    shapes = tuple(fragment_polyline(f) for f in frags)
    return SceneGraph(shapes=shapes, stroke_width=stroke_width, background=background)


def kanizsa_triangle_scene(
    spec: TriangleSpec,
    radius: float,
    theta_local: float = 0.0,
    stroke_width: float = 2.0,
    background: str = "white",
) -> SceneGraph:
    pacs = kanizsa_pacmen(spec, radius=radius, theta_local=theta_local)
    shapes = tuple(resolve_pacman(p) for p in pacs)
    return SceneGraph(shapes=shapes, stroke_width=stroke_width, background=background)


# Diagonally opposite corner indices: the base pair occupies one diagonal,
# the composite pair adds the other.
_BASE_CORNERS = (0, 2)
_ADDED_CORNERS = (1, 3)


def square_set_scenes(
    spec: SquareSpec,
    edge_length: float,
    condition: str,
    stroke_width: float = 2.0,
    background: str = "white",
) -> dict[str, SceneGraph]:
    """The four images of one configural-effect set.

    base_a holds two diagonally opposite components in figure-consistent
    orientation; base_b holds the same two components each rotated 180
    degrees in place. The composite images add the remaining diagonal's
    components, identically to both, so composite_a forms the closed
    (or valid illusory) square and composite_b does not.
    """
    if condition not in ("lines", "kanizsa"):
        raise ValueError(f"unknown condition {condition!r}")

    if condition == "lines":
        comps = square_components(
            spec.center, spec.theta_global, side=spec.side, edge_length=edge_length
        )
        aligned = [fragment_polyline(c) for c in comps]
        flipped = [fragment_polyline(replace(c, local_rotation=180.0)) for c in comps]
    else:
        pacs = kanizsa_pacmen(spec, radius=edge_length, theta_local=0.0)
        aligned = [resolve_pacman(p) for p in pacs]
        flipped = [
            resolve_pacman(replace(p, local_rotation=180.0)) for p in pacs
        ]

    base_a = tuple(aligned[i] for i in _BASE_CORNERS)
    base_b = tuple(flipped[i] for i in _BASE_CORNERS)
    added = tuple(aligned[i] for i in _ADDED_CORNERS)

    def scene(shapes):
        return SceneGraph(shapes=shapes, stroke_width=stroke_width, background=background)

    return {
        "base_a": scene(base_a),
        "base_b": scene(base_b),
        "composite_a": scene(base_a + added),
        "composite_b": scene(base_b + added),
    }
