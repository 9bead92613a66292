"""Synthetic random-dot stereo scenes with exact ground truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .disparity import DisparityMap
from .errors import SceneError
from .rng import random_tensor


@dataclass(frozen=True)
class PlaneSpec:
    """Axis-aligned rectangle ``[y0, y1) x [x0, x1)`` at disparity
    ``disparity + slope_x * (x - x0) + slope_y * (y - y0)``.
    """

    y0: int
    x0: int
    y1: int
    x1: int
    disparity: float
    slope_x: float = 0.0
    slope_y: float = 0.0

    @classmethod
    def full(cls, h: int, w: int, disparity: float) -> "PlaneSpec":
        return cls(0, 0, h, w, disparity)


@dataclass
class SyntheticScene:
    left: np.ndarray  # [3, H, W]
    right: np.ndarray
    gt: DisparityMap
    occlusion: np.ndarray  # [H, W] bool, True where the left pixel has no match
    descriptor: dict = field(default_factory=dict)

    @property
    def noc(self) -> np.ndarray:
        return ~self.occlusion


def _quantised_noise(seed: int, name: str, shape) -> np.ndarray:
    # multiples of 1/255 survive a PNM round trip bit-exactly
    u = random_tensor(seed, name, shape)
    return (np.floor(u.astype(np.float64) * 256.0).clip(0, 255) / 255.0).astype(np.float32)


def render_disparity(h: int, w: int, layout: list[PlaneSpec]) -> np.ndarray:
    """Paint planes in order (later planes overwrite earlier ones); every pixel must be covered."""
    gt = np.full((h, w), np.nan)
    yy, xx = np.mgrid[0:h, 0:w]
    for p in layout:
        if not (0 <= p.y0 < p.y1 <= h and 0 <= p.x0 < p.x1 <= w):
            raise SceneError(f"plane rectangle {p} outside the {h}x{w} image")
        sel = (slice(p.y0, p.y1), slice(p.x0, p.x1))
        gt[sel] = p.disparity + p.slope_x * (xx[sel] - p.x0) + p.slope_y * (yy[sel] - p.y0)
    if np.isnan(gt).any():
        raise SceneError("layout leaves pixels without a disparity")
    return gt


def generate_stereogram(
    h: int,
    w: int,
    layout: list[PlaneSpec],
    seed: int = 42,
    max_disparity: int = 192,
) -> SyntheticScene:
    """Random-dot left image and the right image obtained by warping it with the layout's disparity.

    Each left pixel ``(y, x)`` lands at ``(y, x - d)`` in the right view; when
    several land on the same right pixel the one with larger disparity (nearer)
    wins, ties going to the larger ``x``. Losers and pixels warped off the
    left border are marked occluded. Right pixels that receive nothing keep
    fresh noise.
    """
    if h % 16 or w % 16:
        raise SceneError(f"scene size {h}x{w} must be divisible by 16")
    if not layout:
        raise SceneError("layout must contain at least one plane")
    gt = render_disparity(h, w, layout)
    if gt.min() < 0 or gt.max() >= max_disparity:
        raise SceneError(f"disparities span [{gt.min()}, {gt.max()}], outside [0, {max_disparity})")
    if not np.array_equal(gt, np.round(gt)):
        raise SceneError("non-integer disparities need interpolation, which the generator does not support")
    disp = gt.astype(np.int64)

    left = _quantised_noise(seed, "scene.left", (3, h, w))
    right = _quantised_noise(seed, "scene.right-fill", (3, h, w))

    yy, xx = np.mgrid[0:h, 0:w]
    target = xx - disp
    inside = target >= 0
    priority = disp * w + xx
    best = np.full((h, w), -1, dtype=np.int64)
    np.maximum.at(best, (yy[inside], target[inside]), priority[inside])
    visible = np.zeros((h, w), bool)
    visible[inside] = best[yy[inside], target[inside]] == priority[inside]
    right[:, yy[visible], target[visible]] = left[:, yy[visible], xx[visible]]

    descriptor = {"seed": seed, "height": h, "width": w, "planes": [asdict(p) for p in layout]}
    return SyntheticScene(left, right, DisparityMap(gt.astype(np.float32)), ~visible, descriptor)


def census_features(img: np.ndarray, window: int = 7) -> np.ndarray:
    """Signed census transform: ``+1`` where a neighbour is brighter than the centre, else ``-1``.

    ``img`` is ``[C, H, W]`` (channels are averaged); returns ``[window**2 - 1, H, W]``
    with zero-padded borders.
    """
    gray = img.astype(np.float64).mean(axis=0)
    h, w = gray.shape
    r = window // 2
    gp = np.pad(gray, r)
    bits = []
    for dy in range(window):
        for dx in range(window):
            if dy == r and dx == r:
                continue
            bits.append(np.where(gp[dy : dy + h, dx : dx + w] > gray, 1.0, -1.0))
    return np.stack(bits).astype(np.float32)
