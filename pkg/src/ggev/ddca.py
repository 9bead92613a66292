"""Depth-aware dynamic cost aggregation and soft-argmin regression.

Each disparity slice ``C_d`` of the raw volume is aggregated on its own:

1. queries ``Q`` come from a 1x1 projection of ``C_d``; keys ``K`` from a 1x1
   projection of the depth-aware features pooled to ``s x s`` centres;
2. per channel group, the affinity ``A_g = Q_g^T K_g`` (pixels x centres) is
   mapped to ``k*k`` logits and softmax-normalised into a per-pixel kernel;
3. the slice, concatenated with a projection of the depth-aware features, is
   filtered with those kernels (channels of one group share a kernel), once
   with a small and once with a large kernel; the two results are summed and
   projected back to ``G`` channels.

Slices never interact, so they can be processed in any order or in parallel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .cost_volume import CostVolume
from .errors import ConfigurationError, DimensionError
from .tensor import DTYPE, adaptive_avg_pool, concat_channels, conv2d, softmax
from .weights import ModelWeights


@dataclass(frozen=True)
class AffinityBundle:
    q: np.ndarray  # [C, H*W]
    k: np.ndarray  # [C, S*S]
    a: np.ndarray  # [G, H*W, S*S]
    spatial: tuple[int, int]

    @property
    def groups(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class DynamicKernelField:
    """Per-group, per-pixel kernels ``m`` of shape ``[G, H*W, k*k]`` (row-major taps)."""

    m: np.ndarray
    kernel_size: int
    spatial: tuple[int, int]

    @property
    def groups(self) -> int:
        return self.m.shape[0]


def pooled_keys(f_da: np.ndarray, weights: ModelWeights, s: int) -> np.ndarray:
    """Projected regional centres ``K`` as ``[C, s*s]``."""
    pooled = adaptive_avg_pool(f_da, s)
    keys = conv2d(pooled, weights["ddca.wk.w"], weights["ddca.wk.b"])
    return keys.reshape(keys.shape[0], -1)


def compute_affinity(
    c_d: np.ndarray,
    f_da: np.ndarray,
    weights: ModelWeights,
    s: int,
    keys: np.ndarray | None = None,
) -> AffinityBundle:
    """Affinity between a cost slice ``[G, H, W]`` and pooled depth-aware features ``[C, H, W]``.

    ``keys`` may carry a precomputed :func:`pooled_keys` result, which does not
    depend on the slice.
    """
    g, h, w = c_d.shape
    c = f_da.shape[0]
    if f_da.shape[1:] != (h, w):
        raise DimensionError(f"slice {c_d.shape} and features {f_da.shape} differ spatially")
    if c % g:
        raise ConfigurationError(f"{c} feature channels not divisible by {g} groups")
    q = conv2d(c_d, weights["ddca.wq.w"], weights["ddca.wq.b"]).reshape(c, h * w)
    k = pooled_keys(f_da, weights, s) if keys is None else keys
    if k.shape[0] != c:
        raise DimensionError(f"keys have {k.shape[0]} channels, queries {c}")
    per = c // g
    qg = q.astype(np.float64).reshape(g, per, h * w)
    kg = k.astype(np.float64).reshape(g, per, -1)
    a = np.einsum("gcp,gcs->gps", qg, kg).astype(DTYPE)
    return AffinityBundle(q, k, a, (h, w))


def kernels_from_affinity(
    aff: AffinityBundle,
    weights: ModelWeights,
    k: int,
    branch: str = "small",
) -> DynamicKernelField:
    """Softmax-normalised ``k x k`` kernels from the affinity rows via the branch's linear map."""
    if k < 1 or k % 2 == 0:
        raise ConfigurationError(f"kernel size must be odd, got {k}")
    wm = weights[f"ddca.wm_{branch}.w"]
    bm = weights[f"ddca.wm_{branch}.b"]
    if wm.shape != (aff.a.shape[2], k * k):
        raise ConfigurationError(
            f"W_m for branch {branch!r} has shape {wm.shape}, need {(aff.a.shape[2], k * k)}"
        )
    logits = np.matmul(aff.a.astype(np.float64), wm.astype(np.float64)) + bm.astype(np.float64)
    return DynamicKernelField(softmax(logits, axis=-1), k, aff.spatial)


def dynamic_group_conv(x: np.ndarray, kernels: DynamicKernelField) -> np.ndarray:
    """Filter ``[C_x, H, W]`` with per-pixel kernels shared inside each contiguous channel group.

    Zero padding at the borders. The loop runs over the ``k*k`` taps, each a
    dense multiply-add over whole channel planes.
    """
    cx, h, w = x.shape
    g = kernels.groups
    if (h, w) != kernels.spatial:
        raise DimensionError(f"input {x.shape} does not match kernel field {kernels.spatial}")
    if cx % g:
        raise ConfigurationError(f"{cx} channels not divisible by {g} groups")
    k = kernels.kernel_size
    r = k // 2
    xp = np.pad(x.astype(np.float64), ((0, 0), (r, r), (r, r))).reshape(g, cx // g, h + 2 * r, w + 2 * r)
    m = kernels.m.astype(np.float64).reshape(g, 1, h, w, k * k)
    out = np.zeros((g, cx // g, h, w), dtype=np.float64)
    for ky in range(k):
        for kx in range(k):
            out += m[..., ky * k + kx] * xp[:, :, ky : ky + h, kx : kx + w]
    return out.reshape(cx, h, w).astype(DTYPE)


def _aggregate_slice(
    c_d: np.ndarray,
    f_da4: np.ndarray,
    fproj: np.ndarray,
    keys: np.ndarray,
    weights: ModelWeights,
    cfg: RunConfig,
) -> np.ndarray:
    aff = compute_affinity(c_d, f_da4, weights, cfg.s, keys=keys)
    fused = concat_channels([c_d, fproj])
    total = None
    for branch, k in (("small", cfg.k_small), ("large", cfg.k_large)):
        y = dynamic_group_conv(fused, kernels_from_affinity(aff, weights, k, branch)).astype(np.float64)
        total = y if total is None else total + y
    return conv2d(total.astype(DTYPE), weights["ddca.out.w"], weights["ddca.out.b"])


def ddca_aggregate(
    vol: CostVolume,
    f_da4: np.ndarray,
    weights: ModelWeights,
    cfg: RunConfig,
    threads: int | None = 1,
) -> CostVolume:
    """Aggregate every disparity slice independently and restack them in disparity order."""
    if vol.kind != "raw":
        raise ConfigurationError("ddca_aggregate expects a raw volume")
    g, n_d, h, w = vol.data.shape
    if f_da4.shape[1:] != (h, w):
        raise DimensionError(f"features {f_da4.shape} do not match volume {vol.data.shape}")
    keys = pooled_keys(f_da4, weights, cfg.s)
    fproj = conv2d(f_da4, weights["ddca.fproj.w"], weights["ddca.fproj.b"])

    def run(d: int) -> np.ndarray:
        return _aggregate_slice(vol.data[:, d], f_da4, fproj, keys, weights, cfg)

    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            slices = list(pool.map(run, range(n_d)))
    else:
        slices = [run(d) for d in range(n_d)]
    return CostVolume(np.stack(slices, axis=1), "aggregated")


def score_volume(vol: CostVolume, weights: ModelWeights) -> np.ndarray:
    """Collapse the ``G`` group channels to one matching score per ``(d, y, x)``."""
    g, n_d, h, w = vol.data.shape
    scores = conv2d(vol.data.reshape(g, n_d * h, w), weights["ddca.score.w"], weights["ddca.score.b"])
    return scores.reshape(n_d, h, w)


def soft_argmin_scores(scores: np.ndarray) -> np.ndarray:
    """Expected disparity index under a softmax over axis 0 of ``[D, H, W]`` scores."""
    n_d = scores.shape[0]
    s64 = scores.astype(np.float64)
    e = np.exp(s64 - s64.max(axis=0, keepdims=True))
    idx = np.arange(n_d, dtype=np.float64)[:, None, None]
    d0 = (idx * e).sum(axis=0) / e.sum(axis=0)
    return np.clip(d0, 0.0, n_d - 1).astype(DTYPE)


def soft_argmin(vol: CostVolume, weights: ModelWeights) -> np.ndarray:
    """Initial quarter-resolution disparity ``[H4, W4]`` from an aggregated volume."""
    return soft_argmin_scores(score_volume(vol, weights))
