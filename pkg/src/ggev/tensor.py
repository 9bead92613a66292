"""Dense float32 array primitives.

Arrays are plain ``numpy.ndarray`` objects in float32, channel-first
(``C x H x W``). Every routine here is a pure function: inputs are never
modified and results are freshly allocated. Reductions accumulate in float64
and round the result back to float32 so that the fast paths and the naive
reference loops in :mod:`ggev.oracles` agree to a few ulps.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

DTYPE = np.float32


def as_tensor(x, name: str = "tensor") -> np.ndarray:
    """Validate external data and return it as a contiguous float32 array.

    Raises:
        DimensionError: rank outside 1..4 or a zero-sized axis.
        ValueError: the payload contains NaN or Inf.
    """
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    if not 1 <= arr.ndim <= 4:
        raise DimensionError(f"{name}: rank {arr.ndim} outside 1..4")
    if 0 in arr.shape:
        raise DimensionError(f"{name}: empty axis in shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: non-finite values")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product ``a @ b`` for 2-D operands."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = np.matmul(a.astype(np.float64), b.astype(np.float64))
    return out.astype(DTYPE)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    if x.shape[axis] < 1:
        raise DimensionError("softmax over an empty axis")
    x64 = x.astype(np.float64)
    e = np.exp(x64 - x64.max(axis=axis, keepdims=True))
    return (e / e.sum(axis=axis, keepdims=True)).astype(DTYPE)


def softmax_last_axis(x: np.ndarray) -> np.ndarray:
    return softmax(x, axis=-1)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x64 = x.astype(np.float64)
    return (0.5 * (1.0 + np.tanh(0.5 * x64))).astype(DTYPE)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x.astype(np.float64)).astype(DTYPE)


def leaky_relu(x: np.ndarray, slope: float = 0.1) -> np.ndarray:
    return np.where(x >= 0, x, x * DTYPE(slope)).astype(DTYPE)


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray | None = None,
    stride: int = 1,
    pad: int = 0,
) -> np.ndarray:
    """Zero-padded 2-D cross-correlation.

    Args:
        x: input of shape ``[C_in, H, W]``.
        weight: kernel bank ``[C_out, C_in, k, k]`` with odd ``k``.
        bias: optional ``[C_out]``.
        stride: spatial stride (>= 1).
        pad: zero padding on every border.

    Returns:
        ``[C_out, H', W']`` with ``H' = (H + 2*pad - k) // stride + 1``.
    """
    if x.ndim != 3 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects [C,H,W] and [O,C,k,k], got {x.shape}, {weight.shape}")
    c_out, c_in, kh, kw = weight.shape
    if kh != kw or kh % 2 == 0:
        raise DimensionError(f"conv2d kernel must be square and odd, got {kh}x{kw}")
    if x.shape[0] != c_in:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape[0]}, kernel {c_in}")
    if stride < 1 or pad < 0:
        raise DimensionError(f"invalid stride {stride} / pad {pad}")
    _, h, w = x.shape
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise DimensionError(f"conv2d output size {h_out}x{w_out} is not positive")

    w64 = weight.astype(np.float64)
    if kh == 1 and stride == 1 and pad == 0:
        out = np.tensordot(w64[:, :, 0, 0], x.astype(np.float64), axes=(1, 0))
    else:
        xp = np.pad(x.astype(np.float64), ((0, 0), (pad, pad), (pad, pad)))
        win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
        win = win[:, : (h_out - 1) * stride + 1 : stride, : (w_out - 1) * stride + 1 : stride]
        out = np.tensordot(w64, win, axes=([1, 2, 3], [0, 3, 4]))
    if bias is not None:
        out = out + bias.astype(np.float64)[:, None, None]
    return out.astype(DTYPE)


def adaptive_avg_pool(x: np.ndarray, s: int) -> np.ndarray:
    """Average ``[C, H, W]`` into an ``s x s`` grid of (possibly overlapping) cells.

    Cell ``(i, j)`` spans rows ``[floor(i*H/s), ceil((i+1)*H/s))`` and the
    analogous column range.
    """
    if x.ndim != 3:
        raise DimensionError(f"adaptive_avg_pool expects [C,H,W], got {x.shape}")
    c, h, w = x.shape
    if s < 1 or s > h or s > w:
        raise DimensionError(f"pool size {s} outside 1..min({h}, {w})")
    x64 = x.astype(np.float64)
    out = np.empty((c, s, s), dtype=np.float64)
    for i in range(s):
        r0, r1 = (i * h) // s, -((-(i + 1) * h) // s)
        for j in range(s):
            c0, c1 = (j * w) // s, -((-(j + 1) * w) // s)
            out[:, i, j] = x64[:, r0:r1, c0:c1].mean(axis=(1, 2))
    return out.astype(DTYPE)


def _resize_axis(x: np.ndarray, size: int, axis: int) -> np.ndarray:
    n = x.shape[axis]
    if n == size:
        return x
    src = (np.arange(size, dtype=np.float64) + 0.5) * (n / size) - 0.5
    src = np.clip(src, 0.0, n - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = src - i0
    shape = [1] * x.ndim
    shape[axis] = size
    frac = frac.reshape(shape)
    a = np.take(x, i0, axis=axis)
    b = np.take(x, i1, axis=axis)
    # a + t*(b - a) keeps constant fields exact
    return a + frac * (b - a)


def bilinear_resize(x: np.ndarray, h2: int, w2: int) -> np.ndarray:
    """Bilinear resampling of ``[C, H, W]`` with half-pixel centres (no corner alignment)."""
    if x.ndim != 3:
        raise DimensionError(f"bilinear_resize expects [C,H,W], got {x.shape}")
    if h2 < 1 or w2 < 1:
        raise DimensionError(f"target size {h2}x{w2} must be positive")
    out = _resize_axis(x.astype(np.float64), h2, axis=1)
    out = _resize_axis(out, w2, axis=2)
    return out.astype(DTYPE)


def concat_channels(xs: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate ``[C_i, H, W]`` arrays along the channel axis, in order."""
    if not xs:
        raise DimensionError("concat_channels needs at least one input")
    spatial = xs[0].shape[1:]
    for t in xs:
        if t.ndim != 3 or t.shape[1:] != spatial:
            raise DimensionError(f"spatial mismatch in concat: {[t.shape for t in xs]}")
    return np.concatenate([t.astype(DTYPE, copy=False) for t in xs], axis=0)
