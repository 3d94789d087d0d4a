"""The two closure metrics over paired feature vectors.

The similarity-based measure compares an incomplete figure to its
matching complete figure by cosine similarity and reports the difference
between the aligned and disordered variants. The configural-effect (CE)
measure contrasts Euclidean distances within a composite image pair and
its base pair.

All accumulation happens in double precision regardless of how features
are stored; taps easily reach 1e5 elements and float32 dot products
drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Manifest, StimulusSpec


@dataclass(frozen=True)
class ClosureTriple:
    """One disordered image with its matched aligned and complete images."""

    disordered: StimulusSpec
    aligned: StimulusSpec
    complete: StimulusSpec


@dataclass(frozen=True)
class MeasureRecord:
    """One measure value with its full covariate tuple."""

    model_id: str
    experiment: str
    measure: str  # "closure" | "ce"
    value: float
    theta_global: float
    background: str
    center: tuple[float, float]
    theta_local: float | None = None
    edge_length: float | None = None
    set_id: int | None = None


def cosine_similarity(x: np.ndarray, y: np.ndarray) -> float:
    """x.y / (|x||y|), accumulated in float64."""
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"need equal-length 1-D vectors, got {x.shape} and {y.shape}")
    xv = x.astype(np.float64, copy=False)
    yv = y.astype(np.float64, copy=False)
    nx = math.sqrt(float(np.dot(xv, xv)))
    ny = math.sqrt(float(np.dot(yv, yv)))
    if nx == 0.0 or ny == 0.0:
        raise ValueError("undefined similarity: zero vector")
    return float(np.dot(xv, yv)) / (nx * ny)


def closure_measure(aligned, complete, disordered) -> float:
    """sim(aligned, complete) - sim(disordered, complete)."""
    return cosine_similarity(aligned, complete) - cosine_similarity(disordered, complete)


def euclidean_distance(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"need equal-length 1-D vectors, got {x.shape} and {y.shape}")
    diff = x.astype(np.float64, copy=False) - y.astype(np.float64, copy=False)
    return math.sqrt(float(np.dot(diff, diff)))


def configural_effect(base_a, base_b, comp_a, comp_b) -> float:
    """(D(comp_a, comp_b) - D(base_a, base_b)) / (sum of the two)."""
    d_comp = euclidean_distance(comp_a, comp_b)
    d_base = euclidean_distance(base_a, base_b)
    denom = d_comp + d_base
    if denom == 0.0:
        raise ValueError("degenerate set: both pair distances are zero")
    return (d_comp - d_base) / denom


# ---------------------------------------------------------------------------
# Pairing rules


def _match_key(spec: StimulusSpec, with_edge: bool) -> tuple:
    key = (spec.theta_global, spec.background, spec.center)
    if with_edge:
        key += (spec.edge_length,)
    return key


def pair_exp1(manifest: Manifest) -> list[ClosureTriple]:
    """One triple per disordered image.

    A disordered image matches the unique aligned image sharing
    (theta_global, background, center, edge_length) and the unique
    complete image sharing (theta_global, background, center).
    """
    complete = {}
    aligned = {}
    for s in manifest.specs:
        if s.group == "complete":
            complete[_match_key(s, with_edge=False)] = s
        elif s.group == "aligned":
            aligned[_match_key(s, with_edge=True)] = s
    triples = []
    for s in manifest.specs:
        if s.group != "disordered":
            continue
        ka = _match_key(s, with_edge=True)
        kc = _match_key(s, with_edge=False)
        if ka not in aligned:
            raise ValueError(f"no aligned partner for tuple {ka!r}")
        if kc not in complete:
            raise ValueError(f"no complete partner for tuple {kc!r}")
        triples.append(ClosureTriple(disordered=s, aligned=aligned[ka], complete=complete[kc]))
    return triples


def closure_records(
    manifest: Manifest,
    features: dict[str, np.ndarray],
    model_id: str,
    aggregate_theta_local: bool = False,
) -> list[MeasureRecord]:
    """Closure measure for every triple in the manifest.

    With aggregate_theta_local the four disordered similarities sharing a
    covariate tuple are averaged before differencing, yielding one record
    per aligned image instead of one per disordered image.
    """
    triples = pair_exp1(manifest)

    def vec(spec: StimulusSpec) -> np.ndarray:
        try:
            return features[spec.file_path]
        except KeyError:
            raise ValueError(f"missing features for image {spec.file_path!r}") from None

    if not aggregate_theta_local:
        return [
            MeasureRecord(
                model_id=model_id,
                experiment=manifest.dataset_id,
                measure="closure",
                value=closure_measure(vec(t.aligned), vec(t.complete), vec(t.disordered)),
                theta_global=t.disordered.theta_global,
                theta_local=t.disordered.theta_local,
                edge_length=t.disordered.edge_length,
                background=t.disordered.background,
                center=t.disordered.center,
            )
            for t in triples
        ]

    by_aligned: dict[tuple, list[ClosureTriple]] = {}
    for t in triples:
        by_aligned.setdefault(_match_key(t.aligned, with_edge=True), []).append(t)
    records = []
    for key in sorted(by_aligned, key=lambda k: (k[0], k[1], k[2], k[3])):
        group = by_aligned[key]
        a = group[0].aligned
        sim_aligned = cosine_similarity(vec(a), vec(group[0].complete))
        sim_dis = [cosine_similarity(vec(t.disordered), vec(t.complete)) for t in group]
        records.append(
            MeasureRecord(
                model_id=model_id,
                experiment=manifest.dataset_id,
                measure="closure",
                value=sim_aligned - sum(sim_dis) / len(sim_dis),
                theta_global=a.theta_global,
                theta_local=None,
                edge_length=a.edge_length,
                background=a.background,
                center=a.center,
            )
        )
    return records


def pair_exp2(manifest: Manifest) -> list[dict[str, StimulusSpec]]:
    """Group an exp2 manifest into its sets of four images."""
    sets: dict[int, dict[str, StimulusSpec]] = {}
    for s in manifest.specs:
        sets.setdefault(s.set_id, {})[s.group] = s
    out = []
    for set_id in sorted(sets):
        members = sets[set_id]
        missing = [g for g in ("base_a", "base_b", "composite_a", "composite_b") if g not in members]
        if missing:
            raise ValueError(f"set {set_id} is missing groups {missing}")
        out.append(members)
    return out


def ce_records(
    manifest: Manifest, features: dict[str, np.ndarray], model_id: str
) -> list[MeasureRecord]:
    """One configural-effect value per set.

    A fully degenerate set (both pair distances exactly zero, which
    linear feature maps produce on symmetric stimuli) records CE = 0:
    the composite pair is no easier to tell apart than the base pair.
    Downstream t-tests then flag the zero-variance group.
    """
    records = []
    for members in pair_exp2(manifest):
        def vec(spec: StimulusSpec) -> np.ndarray:
            try:
                return features[spec.file_path]
            except KeyError:
                raise ValueError(f"missing features for image {spec.file_path!r}") from None

        try:
            value = configural_effect(
                vec(members["base_a"]),
                vec(members["base_b"]),
                vec(members["composite_a"]),
                vec(members["composite_b"]),
            )
        except ValueError as exc:
            if "degenerate" not in str(exc):
                raise
            value = 0.0
        ref = members["composite_a"]
        records.append(
            MeasureRecord(
                model_id=model_id,
                experiment=manifest.dataset_id,
                measure="ce",
                value=value,
                theta_global=ref.theta_global,
                edge_length=ref.edge_length,
                background=ref.background,
                center=ref.center,
                set_id=ref.set_id,
            )
        )
    return records
