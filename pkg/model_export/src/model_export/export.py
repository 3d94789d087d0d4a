"""Export a classifier to a serialized graph module with a named tap.

The exported module's forward returns ``{tap_node: tensor}``; the
benchmark harness loads it with ``torch.jit.load`` and selects the tap
by name. Parity against the in-memory source model is checked on random
probe tensors before anything is written.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import torch
import torchvision.models as tv_models
from torchvision.models.feature_extraction import (
    create_feature_extractor,
    get_graph_node_names,
)

from .registry import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    MODEL_REGISTRY,
    ExportRequest,
    resolve_tap_node,
)

PARITY_TOLERANCE = 1e-4
N_PROBES = 16
_PROBE_SEED = 20240917


def _weights_enum(spec: str):
    enum_name, member = spec.split(".")
    return getattr(getattr(tv_models, enum_name), member)


def build_source_model(model_id: str, pretrained: bool) -> tuple[torch.nn.Module, dict]:
    """Instantiate the source model plus its preprocessing constants."""
    if model_id not in MODEL_REGISTRY:
        raise KeyError(
            f"unknown model id {model_id!r}; known: {sorted(MODEL_REGISTRY)}"
        )
    entry = MODEL_REGISTRY[model_id]
    builder = getattr(tv_models, entry.builder)
    mean, std = IMAGENET_MEAN, IMAGENET_STD
    if pretrained:
        weights = _weights_enum(entry.weights)
        model = builder(weights=weights)
        tf = weights.transforms()
        mean = tuple(float(x) for x in getattr(tf, "mean", mean))
        std = tuple(float(x) for x in getattr(tf, "std", std))
    else:
        kwargs = {"init_weights": False} if entry.builder == "inception_v3" else {}
        model = builder(weights=None, **kwargs)
    model.eval()
    return model, {"mean": mean, "std": std}


def weight_checksum(model: torch.nn.Module) -> str:
    h = hashlib.sha256()
    state = model.state_dict()
    for name in sorted(state):
        h.update(name.encode())
        h.update(state[name].detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _probe_batch(input_size: int, n: int = N_PROBES) -> torch.Tensor:
    rng = np.random.default_rng(_PROBE_SEED)
    return torch.from_numpy(
        rng.normal(size=(n, 3, input_size, input_size)).astype(np.float32)
    )


def make_tap_extractor(model: torch.nn.Module, tap: str) -> tuple[torch.nn.Module, str]:
    """Feature-extractor module returning {resolved_node: tensor}."""
    _, eval_nodes = get_graph_node_names(model)
    node = resolve_tap_node(eval_nodes, tap)
    return create_feature_extractor(model, return_nodes={node: node}), node


def max_relative_deviation(got: torch.Tensor, want: torch.Tensor) -> float:
    """Elementwise deviation scaled by element magnitude with a floor at
    a thousandth of the tensor's peak (near-zero activations otherwise
    turn float noise into spurious failures)."""
    if got.shape != want.shape:
        raise RuntimeError(
            f"shape mismatch between runtimes: exported {tuple(got.shape)} "
            f"vs source {tuple(want.shape)}"
        )
    scale = float(want.abs().max())
    denom = want.abs() + 1e-3 * scale + 1e-12
    return float(((got - want).abs() / denom).max())


def verify_export(
    source_model: torch.nn.Module,
    model_path,
    meta: dict,
    probes: torch.Tensor | None = None,
) -> dict:
    """Parity report between the source model and the exported module."""
    if probes is None:
        probes = _probe_batch(meta["input_size"])
    if len(probes) < N_PROBES:
        raise ValueError(f"need at least {N_PROBES} probe images, got {len(probes)}")
    extractor, node = make_tap_extractor(source_model, meta["tap_point"])
    exported = torch.jit.load(os.fspath(model_path), map_location="cpu")
    exported.eval()
    with torch.no_grad():
        want = extractor(probes)[node]
        out = exported(probes)
    if meta["tap_point"] not in out:
        raise KeyError(
            f"tap {meta['tap_point']!r} not among exported outputs {sorted(out)}"
        )
    dev = max_relative_deviation(out[meta["tap_point"]], want)
    return {
        "max_relative_deviation": dev,
        "tolerance": PARITY_TOLERANCE,
        "passed": dev <= PARITY_TOLERANCE,
        "n_probes": int(len(probes)),
    }


def export_model(request: ExportRequest) -> dict:
    """Export one model; returns the written meta dict.

    Writes ``<model_id>.pt`` (the graph module) and
    ``<model_id>.meta.json`` next to it. With ``request.verify`` the
    export aborts if parity with the source model exceeds tolerance.
    """
    entry = MODEL_REGISTRY.get(request.model_id)
    if entry is None:
        raise KeyError(
            f"unknown model id {request.model_id!r}; known: {sorted(MODEL_REGISTRY)}"
        )
    model, norm = build_source_model(request.model_id, request.pretrained)
    extractor, node = make_tap_extractor(model, entry.tap)

    example = _probe_batch(entry.input_size, n=2)
    with torch.no_grad():
        traced = torch.jit.trace(extractor, example, strict=False)

    os.makedirs(request.out_dir, exist_ok=True)
    model_file = f"{request.model_id}.pt"
    model_path = os.path.join(request.out_dir, model_file)
    torch.jit.save(traced, model_path)

    with torch.no_grad():
        tap_min = float(extractor(example)[node].min())
    if entry.nonnegative and tap_min < 0:
        raise RuntimeError(
            f"{request.model_id}: registry claims a rectified tap but probe "
            f"activations reach {tap_min}"
        )

    meta = {
        "model_id": request.model_id,
        "source_model": entry.builder,
        "input_size": entry.input_size,
        "mean": list(norm["mean"]),
        "std": list(norm["std"]),
        "tap_point": node,
        "tap_role": entry.tap_role,
        "nonnegative": entry.nonnegative,
        "model_file": model_file,
        "weight_checksum": weight_checksum(model),
        "pretrained": request.pretrained,
        "torch_version": torch.__version__,
    }
    if request.verify:
        report = verify_export(model, model_path, meta)
        if not report["passed"]:
            os.remove(model_path)
            raise RuntimeError(
                f"{request.model_id}: parity {report['max_relative_deviation']:.3e} "
                f"exceeds {PARITY_TOLERANCE:.0e}"
            )
        meta["parity_max_relative_deviation"] = report["max_relative_deviation"]

    meta_path = os.path.join(request.out_dir, f"{request.model_id}.meta.json")
    with open(meta_path, "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
        f.write("\n")
    return meta
