import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ggev.errors import DimensionError
from ggev.oracles import (
    adaptive_avg_pool_oracle,
    bilinear_oracle,
    conv2d_oracle,
    matmul_oracle,
)
from ggev.tensor import (
    adaptive_avg_pool,
    as_tensor,
    bilinear_resize,
    concat_channels,
    conv2d,
    matmul,
    softmax_last_axis,
)

from conftest import rel_err


class TestMatmul:
    def test_identity(self):
        b = np.array([[1, 2], [3, 4]], np.float32)
        np.testing.assert_array_equal(matmul(np.eye(2, dtype=np.float32), b), b)

    def test_identity_both_sides(self, rng):
        a = rng.standard_normal((2, 2)).astype(np.float32)
        eye = np.eye(2, dtype=np.float32)
        np.testing.assert_array_equal(matmul(matmul(eye.T, a), eye), a)

    def test_matches_triple_loop(self, rng):
        a = rng.standard_normal((4, 3)).astype(np.float32)
        b = rng.standard_normal((3, 5)).astype(np.float32)
        assert rel_err(matmul(a, b), matmul_oracle(a, b)) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(np.ones((2, 3), np.float32), np.ones((2, 3), np.float32))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax_last_axis(np.zeros(3, np.float32)), [1 / 3] * 3, atol=1e-7)

    def test_reference_values(self):
        # exp(k) / sum exp evaluated at 30 digits
        out = softmax_last_axis(np.array([1, 2, 3], np.float32))
        np.testing.assert_allclose(out, [0.0900306, 0.2447285, 0.6652410], atol=1e-6)

    def test_no_overflow(self):
        out = softmax_last_axis(np.array([1000, 0], np.float32))
        assert np.isfinite(out).all()
        np.testing.assert_array_equal(out, [1.0, 0.0])

    def test_empty_axis(self):
        with pytest.raises(DimensionError):
            softmax_last_axis(np.zeros((2, 0), np.float32))

    @given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 9)),
                  elements=st.floats(-50, 50, width=32)),
           st.floats(-100, 100, width=32))
    def test_rows_normalised_and_shift_invariant(self, x, c):
        out = softmax_last_axis(x)
        assert (out >= 0).all()
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
        np.testing.assert_allclose(softmax_last_axis(x + np.float32(c)), out, atol=1e-6)


class TestConv2d:
    def test_pointwise_identity(self, rng):
        x = rng.standard_normal((1, 5, 6)).astype(np.float32)
        out = conv2d(x, np.ones((1, 1, 1, 1), np.float32), np.zeros(1, np.float32))
        np.testing.assert_array_equal(out, x)

    def test_box_sum_centre(self):
        out = conv2d(np.ones((1, 3, 3), np.float32), np.ones((1, 1, 3, 3), np.float32), pad=1)
        assert out[0, 1, 1] == 9.0
        assert out[0, 0, 0] == 4.0

    @pytest.mark.parametrize("stride,pad,k", [(1, 0, 3), (1, 1, 3), (2, 1, 3), (1, 2, 5), (2, 0, 1)])
    def test_matches_naive_loops(self, rng, stride, pad, k):
        x = rng.standard_normal((3, 7, 8)).astype(np.float32)
        w = rng.standard_normal((4, 3, k, k)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        got = conv2d(x, w, b, stride=stride, pad=pad)
        assert got.shape == (4, (7 + 2 * pad - k) // stride + 1, (8 + 2 * pad - k) // stride + 1)
        assert rel_err(got, conv2d_oracle(x, w, b, stride, pad)) < 1e-5

    def test_output_shape(self):
        out = conv2d(np.zeros((2, 16, 32), np.float32), np.zeros((5, 2, 3, 3), np.float32), stride=2, pad=1)
        assert out.shape == (5, 8, 16)

    def test_even_kernel_rejected(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 4, 4), np.float32), np.zeros((1, 1, 2, 2), np.float32))

    def test_non_positive_output(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 2, 2), np.float32), np.zeros((1, 1, 5, 5), np.float32))


class TestAdaptivePool:
    def test_constant(self):
        out = adaptive_avg_pool(np.full((2, 7, 5), 3.25, np.float32), 3)
        np.testing.assert_array_equal(out, np.full((2, 3, 3), 3.25, np.float32))

    def test_hand_averaged(self):
        x = np.arange(1, 17, dtype=np.float32).reshape(1, 4, 4)
        np.testing.assert_array_equal(adaptive_avg_pool(x, 2)[0], [[3.5, 5.5], [11.5, 13.5]])

    def test_identity_size(self, rng):
        x = rng.standard_normal((3, 4, 4)).astype(np.float32)
        np.testing.assert_array_equal(adaptive_avg_pool(x, 4), x)

    def test_overlapping_cells(self, rng):
        x = rng.standard_normal((2, 7, 5)).astype(np.float32)
        assert rel_err(adaptive_avg_pool(x, 3), adaptive_avg_pool_oracle(x, 3)) < 1e-6

    def test_too_large(self):
        with pytest.raises(DimensionError):
            adaptive_avg_pool(np.zeros((1, 4, 8), np.float32), 5)


class TestBilinear:
    def test_constant_preserved(self):
        out = bilinear_resize(np.full((2, 3, 5), 5.0, np.float32), 11, 7)
        np.testing.assert_array_equal(out, 5.0)

    def test_identity_size(self, rng):
        x = rng.standard_normal((2, 3, 4)).astype(np.float32)
        np.testing.assert_array_equal(bilinear_resize(x, 3, 4), x)

    def test_double_size_matches_closed_form(self, rng):
        x = rng.standard_normal((1, 2, 2)).astype(np.float32)
        np.testing.assert_allclose(bilinear_resize(x, 4, 4), bilinear_oracle(x, 4, 4), atol=1e-6)

    def test_arbitrary_sizes(self, rng):
        x = rng.standard_normal((2, 5, 3)).astype(np.float32)
        np.testing.assert_allclose(bilinear_resize(x, 8, 13), bilinear_oracle(x, 8, 13), atol=1e-6)


class TestConcat:
    def test_single(self, rng):
        a = rng.standard_normal((2, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(concat_channels([a]), a)

    def test_layout(self, rng):
        a = rng.standard_normal((2, 3, 4)).astype(np.float32)
        b = rng.standard_normal((3, 3, 4)).astype(np.float32)
        np.testing.assert_array_equal(concat_channels([a, b])[2], b[0])

    def test_split_round_trip(self, rng):
        x = rng.standard_normal((6, 3, 4)).astype(np.float32)
        parts = np.split(x, [1, 4], axis=0)
        assert concat_channels(parts).tobytes() == x.tobytes()

    def test_spatial_mismatch(self):
        with pytest.raises(DimensionError):
            concat_channels([np.zeros((1, 2, 2), np.float32), np.zeros((1, 2, 3), np.float32)])


def test_as_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        as_tensor([1.0, float("nan")])
    with pytest.raises(DimensionError):
        as_tensor(np.zeros((1, 1, 1, 1, 1)))


def test_oracle_agreement_many_instances():
    rng = np.random.default_rng(7)
    for _ in range(100):
        c, h, w = rng.integers(1, 4), rng.integers(3, 9), rng.integers(3, 9)
        x = rng.standard_normal((c, h, w)).astype(np.float32)
        wt = rng.standard_normal((2, c, 3, 3)).astype(np.float32)
        assert rel_err(conv2d(x, wt, pad=1), conv2d_oracle(x, wt, pad=1)) < 1e-5
        s = int(rng.integers(1, min(h, w) + 1))
        assert rel_err(adaptive_avg_pool(x, s), adaptive_avg_pool_oracle(x, s)) < 1e-5
        a = rng.standard_normal((h, c)).astype(np.float32)
        b = rng.standard_normal((c, w)).astype(np.float32)
        assert rel_err(matmul(a, b), matmul_oracle(a, b)) < 1e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_deterministic(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 6, 6)).astype(np.float32)
    w = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
    assert conv2d(x, w, pad=1).tobytes() == conv2d(x.copy(), w.copy(), pad=1).tobytes()
    assert bilinear_resize(x, 9, 4).tobytes() == bilinear_resize(x.copy(), 9, 4).tobytes()
