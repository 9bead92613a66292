"""Group-wise correlation cost volume at quarter resolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError

NUM_GROUPS = 8


@dataclass(frozen=True)
class CostVolume:
    """``data`` is ``[G, D4, H4, W4]``; ``kind`` is ``"raw"`` or ``"aggregated"``."""

    data: np.ndarray
    kind: str = "raw"

    def __post_init__(self) -> None:
        if self.data.ndim != 4:
            raise DimensionError(f"cost volume must be rank 4, got {self.data.shape}")
        if self.kind not in ("raw", "aggregated"):
            raise ValueError(f"unknown volume kind {self.kind!r}")

    @property
    def groups(self) -> int:
        return self.data.shape[0]

    @property
    def num_disparities(self) -> int:
        return self.data.shape[1]


def _check(f_l4: np.ndarray, f_r4: np.ndarray, d_max4: int, groups: int) -> None:
    if f_l4.ndim != 3 or f_l4.shape != f_r4.shape:
        raise DimensionError(f"feature shapes differ or are not [C,H,W]: {f_l4.shape}, {f_r4.shape}")
    if f_l4.shape[0] % groups:
        raise ConfigurationError(f"{f_l4.shape[0]} channels not divisible by {groups} groups")
    if d_max4 < 1:
        raise ConfigurationError(f"d_max4 must be >= 1, got {d_max4}")


def build_gwc_volume(f_l4: np.ndarray, f_r4: np.ndarray, d_max4: int, groups: int = NUM_GROUPS) -> CostVolume:
    """Mean inner product of each channel group between left pixel ``x`` and right pixel ``x - d``.

    Entries with ``x - d < 0`` are zero.
    """
    _check(f_l4, f_r4, d_max4, groups)
    c, h, w = f_l4.shape
    fl = f_l4.astype(np.float64).reshape(groups, c // groups, h, w)
    fr = f_r4.astype(np.float64).reshape(groups, c // groups, h, w)
    vol = np.zeros((groups, d_max4, h, w), dtype=np.float64)
    for d in range(min(d_max4, w)):
        vol[:, d, :, d:] = (fl[..., d:] * fr[..., : w - d]).mean(axis=1)
    return CostVolume(vol.astype(np.float32), "raw")


def gwc_volume_oracle(f_l4: np.ndarray, f_r4: np.ndarray, d_max4: int, groups: int = NUM_GROUPS) -> CostVolume:
    """Element-by-element evaluation of the correlation volume with scalar loops (tests only)."""
    _check(f_l4, f_r4, d_max4, groups)
    c, h, w = f_l4.shape
    per = c // groups
    out = np.zeros((groups, d_max4, h, w), dtype=np.float32)
    for g in range(groups):
        for d in range(d_max4):
            for y in range(h):
                for x in range(w):
                    if x - d < 0:
                        continue
                    acc = 0.0
                    for k in range(g * per, (g + 1) * per):
                        acc += float(f_l4[k, y, x]) * float(f_r4[k, y, x - d])
                    out[g, d, y, x] = acc / per
    return CostVolume(out, "raw")


def winner_take_all(vol: CostVolume) -> np.ndarray:
    """Argmax over disparity of the group-summed volume, ``[H4, W4]`` int array."""
    return vol.data.astype(np.float64).sum(axis=0).argmax(axis=0)
