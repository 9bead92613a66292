from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

RESOLUTIONS = ("full", "quarter")


@dataclass(frozen=True)
class DisparityMap:
    """Disparity field ``[H, W]`` with a validity mask.

    ``resolution`` is ``"full"`` (values in pixels) or ``"quarter"`` (values in
    quarter-resolution pixels, i.e. disparity indices of the cost volume).
    """

    values: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]
    resolution: str = "full"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim == 3 and values.shape[0] == 1:
            values = values[0]
        if values.ndim != 2:
            raise DimensionError(f"disparity map must be [H, W], got {values.shape}")
        valid = np.ones(values.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        if valid.shape != values.shape:
            raise DimensionError(f"mask shape {valid.shape} != map shape {values.shape}")
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"resolution must be one of {RESOLUTIONS}")
        if not np.isfinite(values[valid]).all():
            raise ValueError("disparity map has non-finite values at valid pixels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def with_mask(self, mask: np.ndarray) -> "DisparityMap":
        return DisparityMap(self.values, self.valid & np.asarray(mask, bool), self.resolution)
