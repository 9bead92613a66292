"""Named parameter bundle for every layer of the network.

Weights are never trained here. :func:`init_weights` draws each tensor from
its own SplitMix64 stream (uniform in ``[-a, a]``, ``a = sqrt(1/fan_in)``),
so a parameter's values depend only on the seed, its name and its shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .config import RunConfig
from .errors import ConfigurationError
from .rng import named_uniform

SCALES = (2, 4, 8, 16)
CUES = ("texture", "depth")


def layer_shapes(cfg: RunConfig) -> dict[str, tuple[int, ...]]:
    """Shape of every parameter tensor implied by ``cfg``."""
    ch = cfg.channels
    g = cfg.groups
    c4 = ch[4]
    shapes: dict[str, tuple[int, ...]] = {}

    def conv(name: str, c_out: int, c_in: int, k: int) -> None:
        shapes[f"{name}.w"] = (c_out, c_in, k, k)
        shapes[f"{name}.b"] = (c_out,)

    for cue in CUES:
        c_in = 3
        for scale in SCALES:
            conv(f"{cue}.stage{scale}", ch[scale], c_in, 3)
            c_in = ch[scale]
    for scale in (4, 8, 16):
        conv(f"scf.{scale}", ch[scale], 2 * ch[scale], 1)

    conv("ddca.wq", c4, g, 1)
    conv("ddca.wk", c4, c4, 1)
    s2 = cfg.s * cfg.s
    for branch, k in (("small", cfg.k_small), ("large", cfg.k_large)):
        shapes[f"ddca.wm_{branch}.w"] = (s2, k * k)
        shapes[f"ddca.wm_{branch}.b"] = (k * k,)
    conv("ddca.fproj", g * cfg.fusion_ratio, c4, 1)
    conv("ddca.out", g, g + g * cfg.fusion_ratio, 1)
    conv("ddca.score", 1, g, 1)

    e = cfg.encoder_channels
    x_ch = e + (2 * cfg.radius + 1) * g
    conv("gru.init", cfg.hidden, c4, 1)
    conv("gru.enc1", e, 1, 3)
    conv("gru.enc2", e, e, 3)
    for gate in ("z", "r", "h"):
        conv(f"gru.{gate}", cfg.hidden, cfg.hidden + x_ch, 3)
    conv("gru.dec1", max(cfg.hidden // 2, 1), cfg.hidden, 3)
    conv("gru.dec2", 1, max(cfg.hidden // 2, 1), 3)

    conv("up.conv1", ch[2], cfg.hidden, 3)
    conv("up.conv2", ch[2], 2 * ch[2], 3)
    conv("up.mask", 9, ch[2], 1)
    return shapes


def _fan_in(name: str, shapes: Mapping[str, tuple[int, ...]]) -> int:
    w = shapes[name[:-2] + ".w"]
    if len(w) == 2:  # linear layer applied as x @ W
        return w[0]
    return int(np.prod(w[1:]))


@dataclass(frozen=True)
class ModelWeights:
    params: dict[str, np.ndarray] = field(repr=False)
    seed: int = 0

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.params[name]
        except KeyError:
            raise ConfigurationError(f"missing weight {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def replace(self, **updates: np.ndarray) -> "ModelWeights":
        """Copy with some tensors swapped; keys use ``__`` for ``.`` (``ddca__out__w``)."""
        return self.update({k.replace("__", "."): v for k, v in updates.items()})

    def update(self, updates: Mapping[str, np.ndarray]) -> "ModelWeights":
        params = dict(self.params)
        for name, value in updates.items():
            if name not in params:
                raise ConfigurationError(f"unknown weight {name!r}")
            value = np.asarray(value, dtype=np.float32)
            if value.shape != params[name].shape:
                raise ConfigurationError(
                    f"weight {name!r}: shape {value.shape} != expected {params[name].shape}"
                )
            params[name] = value
        return ModelWeights(params, self.seed)

    def zeroed(self, prefix: str = "", biases_only: bool = False) -> "ModelWeights":
        """Copy with every tensor whose name starts with ``prefix`` set to zero."""
        sel = {
            n: np.zeros_like(v)
            for n, v in self.params.items()
            if n.startswith(prefix) and (not biases_only or n.endswith(".b"))
        }
        return self.update(sel)


def init_weights(cfg: RunConfig) -> ModelWeights:
    shapes = layer_shapes(cfg)
    params = {}
    for name, shape in shapes.items():
        bound = math.sqrt(1.0 / _fan_in(name, shapes))
        params[name] = named_uniform(cfg.seed, name, shape, bound)
    return ModelWeights(params, cfg.seed)


def matching_core(cfg: RunConfig, score_gain: float = 3.0e4) -> ModelWeights:
    """Seeded weights wired so the network reduces to its correlation core.

    Fusion passes the texture features through unchanged, the aggregation
    output keeps only the (averaged) cost channels of the two kernel
    branches, the score head averages groups with gain ``score_gain`` and the
    residual decoder outputs zero. Dynamic kernels, affinities, the GRU and
    the upsampling weights keep their random seeded values.
    """
    w = init_weights(cfg)
    g = cfg.groups
    updates: dict[str, np.ndarray] = {}
    for scale in (4, 8, 16):
        c = cfg.channels[scale]
        fuse = np.zeros((c, 2 * c, 1, 1), np.float32)
        fuse[np.arange(c), np.arange(c), 0, 0] = 1.0
        updates[f"scf.{scale}.w"] = fuse
        updates[f"scf.{scale}.b"] = np.zeros(c, np.float32)
    out = np.zeros((g, g + g * cfg.fusion_ratio, 1, 1), np.float32)
    out[np.arange(g), np.arange(g), 0, 0] = 0.5
    updates["ddca.out.w"] = out
    updates["ddca.out.b"] = np.zeros(g, np.float32)
    updates["ddca.score.w"] = np.full((1, g, 1, 1), score_gain / g, np.float32)
    updates["ddca.score.b"] = np.zeros(1, np.float32)
    updates["gru.dec2.w"] = np.zeros_like(w["gru.dec2.w"])
    updates["gru.dec2.b"] = np.zeros_like(w["gru.dec2.b"])
    return w.update(updates)
