"""Preprocessing, the pixelpool and interchange backends, feature store."""

import numpy as np
import pytest

from closurebench.features import (
    FeatureStore,
    ModelMeta,
    PixelpoolBackend,
    extract,
    pixelpool_features,
    preprocess,
)

IMAGENET_META = ModelMeta(
    model_id="testnet",
    input_size=224,
    mean=(0.485, 0.456, 0.406),
    std=(0.229, 0.224, 0.225),
    tap_point="tap",
    tap_role="test tap",
    nonnegative=False,
)


# ---------------------------------------------------------------------------
# preprocess


def test_preprocess_white_image_channel_values():
    img = np.full((300, 300), 255, dtype=np.uint8)
    x = preprocess(img, IMAGENET_META)
    assert x.shape == (3, 224, 224)
    assert x[0] == pytest.approx((1.0 - 0.485) / 0.229, abs=1e-5)
    assert x[1] == pytest.approx((1.0 - 0.456) / 0.224, abs=1e-5)


def test_preprocess_black_image_channel_values():
    img = np.zeros((300, 300), dtype=np.uint8)
    x = preprocess(img, IMAGENET_META)
    assert x[0] == pytest.approx((0.0 - 0.485) / 0.229, abs=1e-5)
    assert x[2] == pytest.approx((0.0 - 0.406) / 0.225, abs=1e-5)


def test_preprocess_identity_resize_preserves_values():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, size=(224, 224), dtype=np.uint8)
    meta = ModelMeta(
        model_id="m", input_size=224, mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0),
        tap_point="t", tap_role="r", nonnegative=False,
    )
    x = preprocess(img, meta)
    assert np.abs(x[0] - img / 255.0).max() <= 1.0 / 255.0 + 1e-7


def test_preprocess_rejects_bad_input():
    with pytest.raises(ValueError):
        preprocess(np.zeros((10, 10), dtype=np.float32), IMAGENET_META)
    with pytest.raises(ValueError):
        preprocess(np.zeros((10, 10, 3), dtype=np.uint8), IMAGENET_META)


# ---------------------------------------------------------------------------
# pixelpool


def test_pixelpool_uniform_image_gives_constant_vector():
    img = np.full((300, 300), 131, dtype=np.uint8)
    v = pixelpool_features(img, 5)
    assert v.shape == (25,)
    assert v == pytest.approx(131.0, abs=1e-12)


def test_pixelpool_half_and_half():
    img = np.zeros((300, 300), dtype=np.uint8)
    img[:, 150:] = 255
    assert pixelpool_features(img, 2) == pytest.approx([0.0, 255.0, 0.0, 255.0])


def test_pixelpool_single_cell_is_global_mean():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(300, 300), dtype=np.uint8)
    v = pixelpool_features(img, 1)
    assert v == pytest.approx([img.mean()], abs=1e-9)


def test_pixelpool_remainder_goes_to_last_cell():
    img = np.arange(100, dtype=np.uint8).reshape(10, 10)
    v = pixelpool_features(img, 3)
    # cells are 3x3 except the last row/column which absorb the remainder
    assert v[0] == pytest.approx(img[0:3, 0:3].mean())
    assert v[2] == pytest.approx(img[0:3, 6:10].mean())
    assert v[8] == pytest.approx(img[6:10, 6:10].mean())


def test_pixelpool_rejects_bad_grid():
    img = np.zeros((300, 300), dtype=np.uint8)
    with pytest.raises(ValueError):
        pixelpool_features(img, 0)
    with pytest.raises(ValueError):
        pixelpool_features(img, 301)


# ---------------------------------------------------------------------------
# extract


def _images(n, seed=0):
    rng = np.random.default_rng(seed)
    return [
        (f"img{i}.png", rng.integers(0, 256, size=(300, 300), dtype=np.uint8))
        for i in range(n)
    ]


def test_extract_batch_independence():
    backend = PixelpoolBackend(grid_n=4)
    meta = backend.meta()
    images = _images(10)
    small = extract(images, meta, backend, batch_size=3)
    big = extract(images, meta, backend, batch_size=10)
    for a, b in zip(small, big):
        assert a.image_id == b.image_id
        assert np.allclose(a.values, b.values, rtol=1e-5, atol=0)


def test_extract_duplicate_image_identical_vectors():
    backend = PixelpoolBackend(grid_n=4)
    images = _images(1) * 2
    vecs = extract(images, backend.meta(), backend)
    assert (vecs[0].values == vecs[1].values).all()


def test_extract_vector_length_constant():
    backend = PixelpoolBackend(grid_n=7)
    vecs = extract(_images(5), backend.meta(), backend)
    assert {v.values.shape for v in vecs} == {(49,)}


# ---------------------------------------------------------------------------
# interchange backend (tiny traced module, no pretrained weights involved)


def test_torchscript_backend_round_trip(tmp_path):
    torch = pytest.importorskip("torch")
    from closurebench.features import TorchScriptBackend

    class Tiny(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.conv = torch.nn.Conv2d(3, 2, 3, stride=4)

        def forward(self, x):
            return {"conv_out": torch.relu(self.conv(x))}

    torch.manual_seed(0)
    module = Tiny().eval()
    traced = torch.jit.trace(module, torch.zeros(1, 3, 64, 64), strict=False)
    path = tmp_path / "tiny.pt"
    torch.jit.save(traced, str(path))

    meta = ModelMeta(
        model_id="tiny", input_size=64, mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0),
        tap_point="conv_out", tap_role="only conv", nonnegative=True,
    )
    backend = TorchScriptBackend(path)
    assert backend.available_nodes(meta) == ["conv_out"]

    images = [(f"i{k}", np.full((64, 64), 30 * k, dtype=np.uint8)) for k in range(4)]
    vecs = extract(images, meta, backend, batch_size=2)
    with torch.no_grad():
        want = module(torch.from_numpy(preprocess(images[2][1], meta))[None])["conv_out"]
    assert np.allclose(vecs[2].values, want.numpy().ravel(), rtol=1e-5, atol=1e-6)
    assert all(v.values.min() >= 0 for v in vecs)


def test_torchscript_backend_unknown_tap_lists_nodes(tmp_path):
    torch = pytest.importorskip("torch")
    from closurebench.features import TorchScriptBackend

    class Tiny(torch.nn.Module):
        def forward(self, x):
            return {"a": x.mean(dim=(1, 2, 3), keepdim=True), "b": x * 2}

    traced = torch.jit.trace(Tiny().eval(), torch.zeros(1, 3, 8, 8), strict=False)
    path = tmp_path / "t.pt"
    torch.jit.save(traced, str(path))
    meta = ModelMeta(
        model_id="t", input_size=8, mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0),
        tap_point="missing", tap_role="r", nonnegative=False,
    )
    backend = TorchScriptBackend(path)
    with pytest.raises((KeyError, ValueError), match="available nodes.*'a'"):
        extract([("x", np.zeros((8, 8), dtype=np.uint8))], meta, backend)


# ---------------------------------------------------------------------------
# feature store


def test_store_round_trip(tmp_path):
    store = FeatureStore(tmp_path)
    mat = np.arange(12, dtype=np.float32).reshape(3, 4)
    ids = ["a.png", "b.png", "c.png"]
    store.save("exp1_triangles", "pixelpool", mat, ids, "deadbeef")
    out, out_ids, index = store.load("exp1_triangles", "pixelpool")
    assert (out == mat).all()
    assert out_ids == ids
    assert index["config_hash"] == "deadbeef"
    assert store.has("exp1_triangles", "pixelpool", config_hash="deadbeef")
    assert not store.has("exp1_triangles", "pixelpool", config_hash="other")
    assert not store.has("exp1_triangles", "missing")


def test_store_no_partial_files(tmp_path):
    store = FeatureStore(tmp_path)
    mat = np.zeros((2, 2), dtype=np.float32)
    store.save("d", "m", mat, ["x", "y"], "h")
    leftovers = [p for p in (tmp_path / "d").iterdir() if p.name.endswith(".tmp")]
    assert leftovers == []


def test_store_map_lookup(tmp_path):
    store = FeatureStore(tmp_path)
    mat = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    store.save("d", "m", mat, ["x", "y"], "h")
    fmap = store.load_map("d", "m")
    assert (fmap["y"] == [3.0, 4.0]).all()
