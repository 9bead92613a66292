"""Multi-cue feature extraction and selective channel fusion.

The learned backbones of the original network are replaced by a seeded
stack of stride-2 3x3 convolutions (one stack for texture, one for depth),
or by feature pyramids computed elsewhere and loaded from disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError
from .io import read_tensor, write_tensor
from .tensor import concat_channels, conv2d, leaky_relu
from .weights import SCALES, ModelWeights

TEXTURE_SCALES = (4, 8, 16)
DEPTH_SCALES = (2, 4, 8, 16)
CUE_SCALES = {
    "texture-left": TEXTURE_SCALES,
    "texture-right": TEXTURE_SCALES,
    "depth": DEPTH_SCALES,
    "depth-aware": TEXTURE_SCALES,
}


@dataclass(frozen=True)
class FeaturePyramid:
    levels: dict[int, np.ndarray]
    cue: str

    def __post_init__(self) -> None:
        if self.cue not in CUE_SCALES:
            raise ValueError(f"unknown cue {self.cue!r}")

    def __getitem__(self, scale: int) -> np.ndarray:
        return self.levels[scale]

    @property
    def scales(self) -> tuple[int, ...]:
        return tuple(sorted(self.levels))


def pad_to_multiple(img: np.ndarray, multiple: int = 16) -> np.ndarray:
    """Edge-replicate ``[C, H, W]`` on the bottom/right up to a multiple of ``multiple``."""
    _, h, w = img.shape
    ph, pw = -h % multiple, -w % multiple
    if ph == 0 and pw == 0:
        return img
    return np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="edge")


def extract_builtin_features(img: np.ndarray, weights: ModelWeights, cue: str) -> FeaturePyramid:
    """Run the seeded convolutional encoder for ``cue`` on a ``[3, H, W]`` image."""
    if cue not in ("texture-left", "texture-right", "depth"):
        raise ValueError(f"builtin extractor has no cue {cue!r}")
    if img.ndim != 3 or img.shape[0] != 3:
        raise DimensionError(f"expected a [3, H, W] image, got {img.shape}")
    h, w = img.shape[1:]
    if h % 16 or w % 16:
        raise DimensionError(f"image size {h}x{w} not divisible by 16; pad first")
    prefix = "depth" if cue == "depth" else "texture"
    x = img.astype(np.float32)
    levels = {}
    for scale in SCALES:
        x = conv2d(x, weights[f"{prefix}.stage{scale}.w"], weights[f"{prefix}.stage{scale}.b"], stride=2, pad=1)
        x = leaky_relu(x, 0.1)
        levels[scale] = x
    return FeaturePyramid({s: levels[s] for s in CUE_SCALES[cue]}, cue)


def scf_fuse(texture: FeaturePyramid, depth: FeaturePyramid, weights: ModelWeights) -> FeaturePyramid:
    """Depth-aware features: a 1x1 convolution over ``[texture, depth]`` at each scale."""
    fused = {}
    for scale in TEXTURE_SCALES:
        if scale not in texture.levels or scale not in depth.levels:
            raise DimensionError(f"fusion needs scale {scale} in both pyramids")
        x = concat_channels([texture[scale], depth[scale]])
        fused[scale] = conv2d(x, weights[f"scf.{scale}.w"], weights[f"scf.{scale}.b"])
    return FeaturePyramid(fused, "depth-aware")


def expected_shapes(cue: str, height: int, width: int, channels: dict[int, int]) -> dict[int, tuple[int, int, int]]:
    """Level shapes a pyramid for a ``height x width`` (padded) image must have."""
    return {s: (channels[s], -(-height // s), -(-width // s)) for s in CUE_SCALES[cue]}


def write_pyramid(pyr: FeaturePyramid, directory: str | Path, stem: str | None = None) -> Path:
    """Write one tensor file per level plus a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or pyr.cue
    files = {}
    for scale in pyr.scales:
        name = f"{stem}_s{scale}.ggt"
        write_tensor(pyr[scale], directory / name)
        files[str(scale)] = name
    manifest = directory / f"{stem}.json"
    manifest.write_text(json.dumps({"cue": pyr.cue, "scales": list(pyr.scales), "levels": files}, indent=2) + "\n")
    return manifest


def load_feature_pyramid(
    path: str | Path,
    expected: dict[int, tuple[int, int, int]] | None = None,
) -> FeaturePyramid:
    """Load a pyramid from its manifest, validating scales and (optionally) shapes.

    Raises:
        FormatError: malformed manifest, missing level, shape mismatch or a
            corrupt/non-finite level tensor. The message names the level.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
        cue = manifest["cue"]
        scales = [int(s) for s in manifest["scales"]]
        files = {int(k): v for k, v in manifest["levels"].items()}
    except (OSError, ValueError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"{path}: malformed pyramid manifest ({exc})") from exc
    if cue not in CUE_SCALES:
        raise FormatError(f"{path}: unknown cue {cue!r}")
    required = set(CUE_SCALES[cue]) | set(expected or {})
    levels = {}
    for scale in sorted(required):
        if scale not in scales or scale not in files:
            raise FormatError(f"{path}: missing level {scale}")
        try:
            tensor = read_tensor(path.parent / files[scale])
        except FormatError as exc:
            raise FormatError(f"level {scale}: {exc}") from exc
        if tensor.ndim != 3:
            raise FormatError(f"level {scale}: expected [C, H, W], got {tensor.shape}")
        if expected and scale in expected and tuple(tensor.shape) != tuple(expected[scale]):
            raise FormatError(f"level {scale}: shape {tensor.shape} != expected {expected[scale]}")
        levels[scale] = tensor
    return FeaturePyramid(levels, cue)
