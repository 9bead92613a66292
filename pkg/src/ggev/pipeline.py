"""End-to-end forward pass from a rectified image pair to a full-resolution disparity map."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .cost_volume import CostVolume, build_gwc_volume
from .ddca import ddca_aggregate, soft_argmin
from .disparity import DisparityMap
from .errors import DimensionError
from .features import FeaturePyramid, extract_builtin_features, pad_to_multiple, scf_fuse
from .refine import convex_upsample, refine_iterate
from .weights import ModelWeights

logger = logging.getLogger(__name__)


@dataclass
class InferenceResult:
    disparity: DisparityMap  # full resolution, cropped to the input size
    d0: np.ndarray  # quarter resolution
    iterates: list[np.ndarray]  # quarter resolution, d_1..d_N
    raw_volume: CostVolume
    volume: CostVolume  # aggregated
    features: dict[str, FeaturePyramid]


def compute_features(
    left: np.ndarray,
    right: np.ndarray,
    weights: ModelWeights,
    depth: FeaturePyramid | None = None,
) -> dict[str, FeaturePyramid]:
    """Texture pyramids for both views, depth pyramid for the left view, and their fusion.

    ``left``/``right`` must already be padded to multiples of 16.
    """
    feats = {
        "texture-left": extract_builtin_features(left, weights, "texture-left"),
        "texture-right": extract_builtin_features(right, weights, "texture-right"),
        "depth": depth if depth is not None else extract_builtin_features(left, weights, "depth"),
    }
    feats["depth-aware"] = scf_fuse(feats["texture-left"], feats["depth"], weights)
    return feats


def infer(
    left: np.ndarray,
    right: np.ndarray,
    weights: ModelWeights,
    cfg: RunConfig,
    depth: FeaturePyramid | None = None,
    threads: int | None = 1,
) -> InferenceResult:
    """Estimate disparity for a ``[3, H, W]`` pair (any size; padded internally and cropped back)."""
    if left.shape != right.shape or left.ndim != 3 or left.shape[0] != 3:
        raise DimensionError(f"left {left.shape} and right {right.shape} must be equal [3, H, W]")
    h, w = left.shape[1:]
    left_p, right_p = pad_to_multiple(left), pad_to_multiple(right)

    feats = compute_features(left_p, right_p, weights, depth)
    raw = build_gwc_volume(feats["texture-left"][4], feats["texture-right"][4], cfg.d_max4, cfg.groups)
    logger.debug("raw volume %s", raw.data.shape)
    f_da4 = feats["depth-aware"][4]
    vol = ddca_aggregate(raw, f_da4, weights, cfg, threads=threads)
    d0 = soft_argmin(vol, weights)
    iterates, state = refine_iterate(vol, d0, f_da4, weights, cfg)
    final = iterates[-1] if iterates else d0
    full = convex_upsample(final, state, feats["depth"][2], weights)
    cropped = DisparityMap(full.values[:h, :w].copy(), resolution="full")
    return InferenceResult(cropped, d0, iterates, raw, vol, feats)
