"""Disparity error metrics and the training objective used as an evaluation functional."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .disparity import DisparityMap
from .errors import DimensionError, UndefinedMetricError
from .tensor import bilinear_resize

# bad-x threshold conventions: KITTI 3 px, Middlebury 2 px, ETH3D 1 px
DEFAULT_THRESHOLDS = (1.0, 2.0, 3.0)
D1_THRESHOLD = 3.0


@dataclass
class MetricReport:
    epe: float
    bad: dict[float, float]
    region: str = "all"
    n_valid: int = 0
    extra: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "epe": self.epe,
            "bad": {f"{t:.1f}": v for t, v in sorted(self.bad.items())},
            "region": self.region,
            "n_valid": self.n_valid,
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _errors(pred: DisparityMap, gt: DisparityMap, mask: np.ndarray | None) -> np.ndarray:
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    valid = pred.valid & gt.valid
    if mask is not None:
        mask = np.asarray(mask, bool)
        if mask.shape != gt.shape:
            raise DimensionError(f"region mask {mask.shape} does not match {gt.shape}")
        valid &= mask
    if not valid.any():
        raise UndefinedMetricError("no valid pixels to evaluate")
    return np.abs(pred.values[valid].astype(np.float64) - gt.values[valid].astype(np.float64))


def epe(pred: DisparityMap, gt: DisparityMap, mask: np.ndarray | None = None) -> float:
    """Mean absolute disparity error over pixels valid in both maps (and in ``mask``)."""
    return float(_errors(pred, gt, mask).mean())


def bad_ratio(pred: DisparityMap, gt: DisparityMap, threshold: float, mask: np.ndarray | None = None) -> float:
    """Fraction of valid pixels whose error is strictly greater than ``threshold``."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    err = _errors(pred, gt, mask)
    return float(np.count_nonzero(err > threshold) / err.size)


def evaluate(
    pred: DisparityMap,
    gt: DisparityMap,
    thresholds=DEFAULT_THRESHOLDS,
    mask: np.ndarray | None = None,
    region: str = "all",
) -> MetricReport:
    err = _errors(pred, gt, mask)
    bad = {float(t): float(np.count_nonzero(err > t) / err.size) for t in thresholds}
    return MetricReport(float(err.mean()), bad, region, int(err.size))


def smooth_l1(err: np.ndarray, beta: float = 1.0) -> np.ndarray:
    a = np.abs(err)
    return np.where(a < beta, 0.5 * a * a / beta, a - 0.5 * beta)


def upsample_quarter(disp: DisparityMap, shape: tuple[int, int]) -> DisparityMap:
    """Bilinear x4 resize of a quarter-res map with values scaled by 4."""
    up = bilinear_resize(disp.values[None], *shape)[0] * np.float32(4.0)
    return DisparityMap(up, resolution="full")


def sequence_loss(
    d0: DisparityMap,
    iterates: list[DisparityMap],
    gt: DisparityMap,
    gamma: float = 0.9,
    beta: float = 1.0,
) -> float:
    """Smooth-L1 on the initial estimate plus gamma-decayed L1 on each refinement iterate.

    A quarter-resolution ``d0`` is first brought to full resolution with
    :func:`upsample_quarter`. Every term is a mean over pixels valid in both
    the prediction and ``gt``.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if d0.resolution == "quarter":
        d0 = upsample_quarter(d0, gt.shape)
    v0 = d0.valid & gt.valid
    if not v0.any():
        raise UndefinedMetricError("no valid pixels to evaluate")
    e0 = d0.values[v0].astype(np.float64) - gt.values[v0].astype(np.float64)
    loss = float(smooth_l1(e0, beta).mean())
    n = len(iterates)
    for i, d_i in enumerate(iterates, start=1):
        loss += gamma ** (n - i) * float(_errors(d_i, gt, None).mean())
    return loss
