"""Image -> flattened activation vectors, behind a pluggable backend.

Two backends ship with the harness:

* :class:`PixelpoolBackend` — model-free grid mean-pooling over raw
  pixels. Deterministic and dependency-free, so the whole pipeline is
  testable without any model file.
* :class:`TorchScriptBackend` — runs an exported graph module (a
  serialized model whose forward returns ``{node_name: tensor}``) and
  selects the configured tap node. Requires torch at runtime.

Feature matrices persist as little-endian float32 binaries (one row per
image) with a JSON index sidecar.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
from PIL import Image as PILImage


@dataclass(frozen=True)
class ModelMeta:
    """Everything the harness needs to run one model's tap point."""

    model_id: str
    input_size: int
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    tap_point: str
    tap_role: str
    nonnegative: bool
    model_file: str | None = None  # interchange file, relative to the meta's dir
    weight_checksum: str | None = None

    @staticmethod
    def from_json(path) -> "ModelMeta":
        with open(path) as f:
            d = json.load(f)
        return ModelMeta(
            model_id=d["model_id"],
            input_size=int(d["input_size"]),
            mean=tuple(float(x) for x in d["mean"]),
            std=tuple(float(x) for x in d["std"]),
            tap_point=d["tap_point"],
            tap_role=d["tap_role"],
            nonnegative=bool(d["nonnegative"]),
            model_file=d.get("model_file"),
            weight_checksum=d.get("weight_checksum"),
        )

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=1, sort_keys=True)
            f.write("\n")


PIXELPOOL_META = ModelMeta(
    model_id="pixelpool",
    input_size=300,
    mean=(0.0, 0.0, 0.0),
    std=(1.0, 1.0, 1.0),
    tap_point="grid_mean",
    tap_role="grid mean-intensity pooling (model-free)",
    nonnegative=True,
)


@dataclass(frozen=True)
class FeatureVector:
    model_id: str
    image_id: str
    values: np.ndarray


def preprocess(image: np.ndarray, meta: ModelMeta) -> np.ndarray:
    """8-bit grayscale -> normalized float32 tensor of shape (3, H, W).

    Bilinear resize to the model's input size, channel replication,
    scaling to [0, 1], then per-channel normalization.
    """
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ValueError("expected a 2-D uint8 grayscale image")
    size = (meta.input_size, meta.input_size)
    if image.shape != size:
        pil = PILImage.fromarray(image, mode="L").resize(size, PILImage.BILINEAR)
        image = np.asarray(pil, dtype=np.uint8)
    x = image.astype(np.float32) / 255.0
    out = np.empty((3,) + size, dtype=np.float32)
    for c in range(3):
        out[c] = (x - meta.mean[c]) / meta.std[c]
    return out


def pixelpool_features(image: np.ndarray, grid_n: int = 16) -> np.ndarray:
    """Mean intensity of each grid cell, row-major; remainder rows and
    columns fold into the last cell."""
    if grid_n < 1:
        raise ValueError(f"grid_n must be >= 1, got {grid_n}")
    h, w = image.shape
    bh, bw = h // grid_n, w // grid_n
    if bh < 1 or bw < 1:
        raise ValueError(f"grid_n {grid_n} too fine for image {h}x{w}")
    out = np.empty(grid_n * grid_n, dtype=np.float64)
    k = 0
    for i in range(grid_n):
        r1 = (i + 1) * bh if i < grid_n - 1 else h
        for j in range(grid_n):
            c1 = (j + 1) * bw if j < grid_n - 1 else w
            out[k] = image[i * bh : r1, j * bw : c1].mean(dtype=np.float64)
            k += 1
    return out


class PixelpoolBackend:
    """Model-free backend: features are grid-cell mean intensities."""

    def __init__(self, grid_n: int = 16):
        if grid_n < 1:
            raise ValueError(f"grid_n must be >= 1, got {grid_n}")
        self.grid_n = grid_n

    def meta(self, canvas_size: int = 300) -> ModelMeta:
        from dataclasses import replace

        return replace(
            PIXELPOOL_META,
            input_size=canvas_size,
            tap_point=f"grid_mean_{self.grid_n}",
        )

    def run_batch(self, images: list[np.ndarray], meta: ModelMeta) -> np.ndarray:
        return np.stack([pixelpool_features(img, self.grid_n) for img in images]).astype(
            np.float32
        )


class TorchScriptBackend:
    """Runs an exported interchange module whose forward yields a dict of
    named activation tensors."""

    def __init__(self, model_path):
        import torch  # deferred: only the interchange backend needs it

        self._torch = torch
        self.module = torch.jit.load(os.fspath(model_path), map_location="cpu")
        self.module.eval()

    def available_nodes(self, meta: ModelMeta) -> list[str]:
        x = self._torch.zeros(1, 3, meta.input_size, meta.input_size)
        with self._torch.no_grad():
            out = self.module(x)
        return sorted(out.keys())

    def run_batch(self, images: list[np.ndarray], meta: ModelMeta) -> np.ndarray:
        torch = self._torch
        batch = np.stack([preprocess(img, meta) for img in images])
        with torch.no_grad():
            out = self.module(torch.from_numpy(batch))
        if meta.tap_point not in out:
            raise KeyError(
                f"tap point {meta.tap_point!r} not in model outputs; "
                f"available nodes: {sorted(out.keys())}"
            )
        t = out[meta.tap_point]
        arr = t.detach().cpu().numpy()
        return arr.reshape(arr.shape[0], -1).astype(np.float32)


def extract(
    images: list[tuple[str, np.ndarray]],
    meta: ModelMeta,
    backend,
    batch_size: int = 32,
) -> list[FeatureVector]:
    """Run the backend over (image_id, image) pairs in fixed-size batches.

    Vectors are flattened activations; a given image's vector does not
    depend on which batch it lands in.
    """
    vecs: list[FeatureVector] = []
    expected_dim = None
    for start in range(0, len(images), batch_size):
        chunk = images[start : start + batch_size]
        mat = backend.run_batch([img for _, img in chunk], meta)
        if mat.ndim != 2 or mat.shape[0] != len(chunk):
            raise ValueError(
                f"backend returned shape {mat.shape} for a batch of {len(chunk)}"
            )
        if expected_dim is None:
            expected_dim = mat.shape[1]
        elif mat.shape[1] != expected_dim:
            raise ValueError(
                f"feature length changed across batches: {mat.shape[1]} != {expected_dim}"
            )
        if not np.all(np.isfinite(mat)):
            raise ValueError(f"non-finite activations from model {meta.model_id!r}")
        for (image_id, _), row in zip(chunk, mat):
            vecs.append(FeatureVector(model_id=meta.model_id, image_id=image_id, values=row))
    return vecs


class FeatureStore:
    """Per (dataset, model) float32 matrices on disk, written atomically."""

    def __init__(self, root):
        self.root = os.fspath(root)

    def _paths(self, dataset_id: str, model_id: str) -> tuple[str, str]:
        d = os.path.join(self.root, dataset_id)
        return os.path.join(d, f"{model_id}.f32"), os.path.join(d, f"{model_id}.json")

    def save(
        self,
        dataset_id: str,
        model_id: str,
        matrix: np.ndarray,
        image_ids: list[str],
        config_hash: str,
    ) -> None:
        if matrix.ndim != 2 or matrix.shape[0] != len(image_ids):
            raise ValueError("matrix rows must match image_ids")
        bin_path, idx_path = self._paths(dataset_id, model_id)
        os.makedirs(os.path.dirname(bin_path), exist_ok=True)
        data = np.ascontiguousarray(matrix, dtype="<f4")
        tmp = bin_path + ".tmp"
        with open(tmp, "wb") as f:
            f.write(data.tobytes())
        os.replace(tmp, bin_path)
        index = {
            "dataset_id": dataset_id,
            "model_id": model_id,
            "config_hash": config_hash,
            "dtype": "<f4",
            "rows": int(matrix.shape[0]),
            "dim": int(matrix.shape[1]),
            "image_ids": list(image_ids),
        }
        tmp = idx_path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(index, f, indent=1, sort_keys=True)
            f.write("\n")
        os.replace(tmp, idx_path)

    def has(self, dataset_id: str, model_id: str, config_hash: str | None = None) -> bool:
        bin_path, idx_path = self._paths(dataset_id, model_id)
        if not (os.path.isfile(bin_path) and os.path.isfile(idx_path)):
            return False
        if config_hash is None:
            return True
        with open(idx_path) as f:
            return json.load(f).get("config_hash") == config_hash

    def load(self, dataset_id: str, model_id: str) -> tuple[np.ndarray, list[str], dict]:
        bin_path, idx_path = self._paths(dataset_id, model_id)
        with open(idx_path) as f:
            index = json.load(f)
        mat = np.fromfile(bin_path, dtype="<f4").reshape(index["rows"], index["dim"])
        return mat, list(index["image_ids"]), index

    def load_map(self, dataset_id: str, model_id: str) -> dict[str, np.ndarray]:
        mat, ids, _ = self.load(dataset_id, model_id)
        return {image_id: mat[i] for i, image_id in enumerate(ids)}
