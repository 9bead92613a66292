import json

import numpy as np
import pytest

from ggev.config import RunConfig
from ggev.errors import DimensionError, FormatError
from ggev.features import (
    FeaturePyramid,
    expected_shapes,
    extract_builtin_features,
    load_feature_pyramid,
    pad_to_multiple,
    scf_fuse,
    write_pyramid,
)
from ggev.io import write_tensor
from ggev.weights import init_weights


@pytest.fixture(scope="module")
def weights():
    return init_weights(RunConfig())


def test_level_shapes(weights):
    img = np.random.default_rng(0).random((3, 64, 128)).astype(np.float32)
    tex = extract_builtin_features(img, weights, "texture-left")
    assert tex.scales == (4, 8, 16)
    assert tex[4].shape == (48, 16, 32)
    assert tex[16].shape == (96, 4, 8)
    depth = extract_builtin_features(img, weights, "depth")
    assert depth.scales == (2, 4, 8, 16)
    assert depth[2].shape == (32, 32, 64)
    assert {s: depth[s].shape for s in depth.scales} == expected_shapes("depth", 64, 128, RunConfig().channels)


def test_zero_image_zero_bias_gives_zero(weights):
    w = weights.zeroed("texture.", biases_only=True)
    pyr = extract_builtin_features(np.zeros((3, 32, 32), np.float32), w, "texture-left")
    assert all(not pyr[s].any() for s in pyr.scales)


def test_identical_images_identical_pyramids(weights):
    img = np.random.default_rng(1).random((3, 32, 48)).astype(np.float32)
    a = extract_builtin_features(img, weights, "depth")
    b = extract_builtin_features(img.copy(), weights, "depth")
    assert all(a[s].tobytes() == b[s].tobytes() for s in a.scales)


def test_left_right_share_texture_weights(weights):
    img = np.random.default_rng(2).random((3, 32, 32)).astype(np.float32)
    a = extract_builtin_features(img, weights, "texture-left")
    b = extract_builtin_features(img, weights, "texture-right")
    assert all(np.array_equal(a[s], b[s]) for s in a.scales)


def test_indivisible_rejected(weights):
    with pytest.raises(DimensionError):
        extract_builtin_features(np.zeros((3, 40, 32), np.float32), weights, "depth")


def test_shift_covariance_on_periodic_image(weights):
    rng = np.random.default_rng(3)
    tile = rng.random((3, 64, 32)).astype(np.float32)
    img = np.concatenate([tile] * 4, axis=2)  # 64 x 128, period 32
    shifted = np.roll(img, 16, axis=2)
    a = extract_builtin_features(img, weights, "texture-left")
    b = extract_builtin_features(shifted, weights, "texture-left")
    for s in a.scales:
        k = 16 // s
        margin = 32 // s + 1  # stay clear of the zero-padded borders
        w = a[s].shape[2]
        np.testing.assert_allclose(b[s][:, :, margin + k : w - margin], a[s][:, :, margin : w - margin - k],
                                   rtol=1e-5, atol=1e-6)


def test_features_finite_on_unit_range(weights):
    img = np.random.default_rng(4).random((3, 48, 48)).astype(np.float32)
    pyr = extract_builtin_features(img, weights, "depth")
    assert all(np.isfinite(pyr[s]).all() for s in pyr.scales)


def test_pad_to_multiple_replicates_edges():
    img = np.arange(2 * 3 * 5, dtype=np.float32).reshape(2, 3, 5)
    p = pad_to_multiple(img, 16)
    assert p.shape == (2, 16, 16)
    np.testing.assert_array_equal(p[:, :3, :5], img)
    np.testing.assert_array_equal(p[:, 10, 15], img[:, 2, 4])


class TestScf:
    def _pyramids(self, rng, channels=(6, 8, 8)):
        tex = {s: rng.standard_normal((c, 16 // s * 2, 32 // s * 2)).astype(np.float32)
               for s, c in zip((4, 8, 16), channels)}
        dep = {s: rng.standard_normal(t.shape).astype(np.float32) for s, t in tex.items()}
        dep[2] = rng.standard_normal((4, 16, 32)).astype(np.float32)
        return FeaturePyramid(tex, "texture-left"), FeaturePyramid(dep, "depth")

    def test_identity_selection(self, rng):
        tex, dep = self._pyramids(rng, (8, 8, 16))
        cfg = RunConfig(channels={2: 8, 4: 8, 8: 8, 16: 16})
        w = init_weights(cfg)
        upd = {}
        for s in (4, 8, 16):
            c = cfg.channels[s]
            m = np.zeros((c, 2 * c, 1, 1), np.float32)
            m[np.arange(c), np.arange(c)] = 1
            upd[f"scf.{s}.w"], upd[f"scf.{s}.b"] = m, np.zeros(c, np.float32)
        fused = scf_fuse(tex, dep, w.update(upd))
        assert fused.cue == "depth-aware"
        for s in (4, 8, 16):
            np.testing.assert_array_equal(fused[s], tex[s])

    def test_zero_weights(self, rng):
        tex, dep = self._pyramids(rng, (8, 8, 16))
        w = init_weights(RunConfig(channels={2: 8, 4: 8, 8: 8, 16: 16})).zeroed("scf.")
        fused = scf_fuse(tex, dep, w)
        assert all(not fused[s].any() for s in fused.scales)

    def test_matches_per_pixel_matvec(self, rng):
        tex, dep = self._pyramids(rng, (8, 8, 16))
        w = init_weights(RunConfig(channels={2: 8, 4: 8, 8: 8, 16: 16}))
        fused = scf_fuse(tex, dep, w)
        for s in (4, 8, 16):
            m, b = w[f"scf.{s}.w"][:, :, 0, 0].astype(np.float64), w[f"scf.{s}.b"].astype(np.float64)
            _, h, wd = tex[s].shape
            for y in range(h):
                for x in range(wd):
                    v = np.concatenate([tex[s][:, y, x], dep[s][:, y, x]]).astype(np.float64)
                    np.testing.assert_allclose(fused[s][:, y, x], m @ v + b, atol=1e-6)
            assert fused[s].shape[1:] == tex[s].shape[1:]

    def test_spatial_mismatch(self, rng):
        tex, dep = self._pyramids(rng, (8, 8, 16))
        dep.levels[8] = dep.levels[8][:, :-1]
        w = init_weights(RunConfig(channels={2: 8, 4: 8, 8: 8, 16: 16}))
        with pytest.raises(DimensionError):
            scf_fuse(tex, dep, w)


class TestPyramidFiles:
    def test_round_trip(self, tmp_path, weights):
        img = np.random.default_rng(5).random((3, 32, 32)).astype(np.float32)
        pyr = extract_builtin_features(img, weights, "depth")
        manifest = write_pyramid(pyr, tmp_path)
        back = load_feature_pyramid(manifest, expected_shapes("depth", 32, 32, RunConfig().channels))
        assert back.cue == "depth" and back.scales == pyr.scales
        assert all(back[s].tobytes() == pyr[s].tobytes() for s in pyr.scales)

    def _write(self, tmp_path, scales, bad=None):
        levels = {}
        for s in scales:
            x = np.ones((8, 32 // s, 32 // s), np.float32)
            if s == bad:
                x[0, 0, 0] = np.nan
                (tmp_path / f"l{s}.ggt").write_bytes(
                    b"GGEVTNSR" + np.array([3, *x.shape], "<u4").tobytes() + x.astype("<f4").tobytes())
            else:
                write_tensor(x, tmp_path / f"l{s}.ggt")
            levels[str(s)] = f"l{s}.ggt"
        (tmp_path / "m.json").write_text(json.dumps({"cue": "depth", "scales": list(scales), "levels": levels}))
        return tmp_path / "m.json"

    def test_missing_level(self, tmp_path):
        with pytest.raises(FormatError, match="missing level 8"):
            load_feature_pyramid(self._write(tmp_path, (2, 4, 16)))

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="level 4"):
            load_feature_pyramid(self._write(tmp_path, (2, 4, 8, 16), bad=4))

    def test_shape_mismatch(self, tmp_path):
        path = self._write(tmp_path, (2, 4, 8, 16))
        expected = {2: (8, 16, 16), 4: (8, 8, 8), 8: (8, 4, 4), 16: (8, 2, 3)}
        with pytest.raises(FormatError, match="level 16"):
            load_feature_pyramid(path, expected)
