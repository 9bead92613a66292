"""Iterative GRU refinement at quarter resolution and convex upsampling to full resolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .cost_volume import CostVolume
from .disparity import DisparityMap
from .errors import DimensionError
from .tensor import DTYPE, bilinear_resize, concat_channels, conv2d, leaky_relu, sigmoid, softmax, tanh
from .weights import ModelWeights


@dataclass(frozen=True)
class GruState:
    h: np.ndarray  # [C_h, H4, W4]
    k: int = 0


def init_hidden(f_da4: np.ndarray, weights: ModelWeights) -> GruState:
    return GruState(tanh(conv2d(f_da4, weights["gru.init.w"], weights["gru.init.b"])), 0)


def lookup_geometry(vol: CostVolume, disp: np.ndarray, radius: int = 4) -> np.ndarray:
    """Sample the volume at ``disp + o`` for ``o`` in ``-radius..radius``.

    Linear interpolation along the disparity axis; samples outside
    ``[0, D4 - 1]`` read as zero. Output channels are offset-major:
    channel ``(o + radius) * G + g``.
    """
    g, n_d, h, w = vol.data.shape
    disp = np.asarray(disp)
    if disp.shape != (h, w):
        raise DimensionError(f"disparity {disp.shape} does not match volume {vol.data.shape}")
    data = vol.data.astype(np.float64)
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    base = disp.astype(np.float64)
    out = np.empty(((2 * radius + 1) * g, h, w), dtype=np.float64)

    def gather(idx: np.ndarray) -> np.ndarray:
        inside = (idx >= 0) & (idx < n_d)
        vals = data[:, np.clip(idx, 0, n_d - 1), yy, xx]
        return np.where(inside, vals, 0.0)

    for i, o in enumerate(range(-radius, radius + 1)):
        pos = base + o
        lo = np.floor(pos).astype(np.int64)
        t = pos - lo
        sample = (1.0 - t) * gather(lo) + t * gather(lo + 1)
        out[i * g : (i + 1) * g] = sample
    return out.astype(DTYPE)


def encode_disparity(disp: np.ndarray, weights: ModelWeights, d_max4: int) -> np.ndarray:
    x = (np.asarray(disp, np.float32) / np.float32(d_max4))[None]
    x = leaky_relu(conv2d(x, weights["gru.enc1.w"], weights["gru.enc1.b"], pad=1))
    return leaky_relu(conv2d(x, weights["gru.enc2.w"], weights["gru.enc2.b"], pad=1))


def gru_step(state: GruState, disp: np.ndarray, f_g: np.ndarray, weights: ModelWeights, d_max4: int) -> GruState:
    """One convolutional GRU update driven by the current disparity and geometry features."""
    h = state.h
    x = concat_channels([encode_disparity(disp, weights, d_max4), f_g])
    hx = concat_channels([h, x])
    z = sigmoid(conv2d(hx, weights["gru.z.w"], weights["gru.z.b"], pad=1))
    r = sigmoid(conv2d(hx, weights["gru.r.w"], weights["gru.r.b"], pad=1))
    h_cand = tanh(conv2d(concat_channels([r * h, x]), weights["gru.h.w"], weights["gru.h.b"], pad=1))
    z64 = z.astype(np.float64)
    h_new = (1.0 - z64) * h + z64 * h_cand
    return GruState(h_new.astype(DTYPE), state.k + 1)


def decode_delta(state: GruState, weights: ModelWeights) -> np.ndarray:
    """Residual disparity ``[H4, W4]`` from the hidden state (two 3x3 convolutions)."""
    x = leaky_relu(conv2d(state.h, weights["gru.dec1.w"], weights["gru.dec1.b"], pad=1))
    return conv2d(x, weights["gru.dec2.w"], weights["gru.dec2.b"], pad=1)[0]


def refine_iterate(
    vol: CostVolume,
    d0: np.ndarray,
    f_da4: np.ndarray,
    weights: ModelWeights,
    cfg: RunConfig,
    iters: int | None = None,
) -> tuple[list[np.ndarray], GruState]:
    """Run ``iters`` refinement steps; returns quarter-res iterates ``d_1..d_iters`` and the final state."""
    iters = cfg.iters if iters is None else iters
    n_d = vol.num_disparities
    state = init_hidden(f_da4, weights)
    disp = np.asarray(d0, DTYPE)
    out = []
    for _ in range(iters):
        f_g = lookup_geometry(vol, disp, cfg.radius)
        state = gru_step(state, disp, f_g, weights, n_d)
        delta = decode_delta(state, weights)
        disp = np.clip(disp + delta, 0, n_d - 1).astype(DTYPE)
        out.append(disp)
    return out, state


def upsample_weights(state: GruState, f_d2: np.ndarray, weights: ModelWeights) -> np.ndarray:
    """Per full-resolution pixel, softmax weights over the 3x3 quarter-res neighbourhood: ``[9, H, W]``."""
    _, h4, w4 = state.h.shape
    if f_d2.shape[1:] != (2 * h4, 2 * w4):
        raise DimensionError(f"scale-2 features {f_d2.shape} do not match hidden state {state.h.shape}")
    x = leaky_relu(conv2d(state.h, weights["up.conv1.w"], weights["up.conv1.b"], pad=1))
    x = bilinear_resize(x, 2 * h4, 2 * w4)
    x = leaky_relu(conv2d(concat_channels([x, f_d2]), weights["up.conv2.w"], weights["up.conv2.b"], pad=1))
    x = bilinear_resize(x, 4 * h4, 4 * w4)
    logits = conv2d(x, weights["up.mask.w"], weights["up.mask.b"])
    return softmax(logits, axis=0)


def neighbourhoods(disp: np.ndarray) -> np.ndarray:
    """``[9, H, W]`` full-res stack: tap ``n`` of the 3x3 window around each pixel's parent cell.

    The quarter-res map is edge-replicated so border windows stay convex.
    """
    h4, w4 = disp.shape
    dp = np.pad(np.asarray(disp, np.float64), 1, mode="edge")
    taps = np.stack([dp[dy : dy + h4, dx : dx + w4] for dy in range(3) for dx in range(3)])
    return np.repeat(np.repeat(taps, 4, axis=1), 4, axis=2)


def convex_combine(disp: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """``4 * sum_n mask[n] * neighbour_n`` for a quarter-res map and ``[9, 4H, 4W]`` weights."""
    h4, w4 = disp.shape
    if mask.shape != (9, 4 * h4, 4 * w4):
        raise DimensionError(f"weight map {mask.shape} does not fit disparity {disp.shape}")
    up = 4.0 * (mask.astype(np.float64) * neighbourhoods(disp)).sum(axis=0)
    return up.astype(DTYPE)


def convex_upsample(
    disp: np.ndarray | DisparityMap,
    state: GruState,
    f_d2: np.ndarray,
    weights: ModelWeights,
) -> DisparityMap:
    values = disp.values if isinstance(disp, DisparityMap) else np.asarray(disp)
    if values.shape != state.h.shape[1:]:
        raise DimensionError(f"disparity {values.shape} does not match hidden state {state.h.shape}")
    mask = upsample_weights(state, f_d2, weights)
    return DisparityMap(convex_combine(values, mask), resolution="full")
