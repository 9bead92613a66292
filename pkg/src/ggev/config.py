"""Run configuration: hyperparameters, channel plan and file paths.

The JSON form is a flat object whose keys are the field names of
:class:`RunConfig`; ``channels`` maps scale (as a string) to a channel
count. Unknown keys are rejected. Example::

    {"seed": 42, "d_max4": 48, "iters": 8, "channels": {"4": 48}}
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigurationError

DEFAULT_CHANNELS = {2: 32, 4: 48, 8: 64, 16: 96}
FEATURE_SOURCES = ("builtin", "files")


@dataclass
class RunConfig:
    seed: int = 42
    d_max4: int = 48
    iters: int = 8
    s: int = 8
    k_small: int = 3
    k_large: int = 7
    groups: int = 8
    channels: dict[int, int] = field(default_factory=lambda: dict(DEFAULT_CHANNELS))
    hidden: int = 64
    radius: int = 4
    fusion_ratio: int = 2
    encoder_channels: int = 16
    gamma: float = 0.9
    thresholds: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0])
    threads: int | None = None
    feature_source: str = "builtin"
    left: str | None = None
    right: str | None = None
    gt: str | None = None
    out: str | None = None
    depth_features: str | None = None

    @property
    def max_disparity(self) -> int:
        """Full-resolution disparity range ``D``."""
        return 4 * self.d_max4

    def validate(self) -> "RunConfig":
        if self.iters < 0:
            raise ConfigurationError(f"iters must be >= 0, got {self.iters}")
        if self.d_max4 < 1:
            raise ConfigurationError(f"d_max4 must be >= 1, got {self.d_max4}")
        for name in ("k_small", "k_large"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ConfigurationError(f"{name} must be a positive odd integer, got {k}")
        if self.groups < 1:
            raise ConfigurationError(f"groups must be positive, got {self.groups}")
        if set(self.channels) != set(DEFAULT_CHANNELS):
            raise ConfigurationError(f"channel plan must cover scales {sorted(DEFAULT_CHANNELS)}")
        for scale, c in self.channels.items():
            if c < 1 or c % self.groups:
                raise ConfigurationError(
                    f"channels at scale {scale} ({c}) not divisible by groups ({self.groups})"
                )
        if self.s < 1:
            raise ConfigurationError(f"pool size s must be >= 1, got {self.s}")
        if self.radius < 0 or self.fusion_ratio < 1 or self.hidden < 1 or self.encoder_channels < 1:
            raise ConfigurationError("radius, fusion_ratio, hidden and encoder_channels out of range")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if any(t <= 0 for t in self.thresholds):
            raise ConfigurationError("thresholds must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")
        if self.feature_source not in FEATURE_SOURCES:
            raise ConfigurationError(f"feature_source must be one of {FEATURE_SOURCES}")
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["channels"] = {str(k): v for k, v in self.channels.items()}
        return d

    def merged(self, overrides: dict[str, Any]) -> "RunConfig":
        """New config with non-``None`` overrides applied, then validated."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return from_dict(data)


def from_dict(data: dict[str, Any]) -> RunConfig:
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    if "channels" in data:
        try:
            data["channels"] = {int(k): int(v) for k, v in data["channels"].items()}
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad channel plan: {data['channels']!r}") from exc
    if "thresholds" in data:
        data["thresholds"] = [float(t) for t in data["thresholds"]]
    ints = ("seed", "d_max4", "iters", "s", "k_small", "k_large", "groups", "hidden", "radius",
            "fusion_ratio", "encoder_channels")
    for key in ints:
        if key in data and (isinstance(data[key], bool) or not isinstance(data[key], int)):
            raise ConfigurationError(f"{key} must be an integer, got {data[key]!r}")
    return RunConfig(**data).validate()


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top-level JSON value must be an object")
    return from_dict(data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
