"""Forward-only CPU implementation of the GGEV stereo matching pipeline."""

__version__ = "0.1.0"

from .config import RunConfig
from .cost_volume import CostVolume, build_gwc_volume
from .disparity import DisparityMap
from .pipeline import InferenceResult, infer
from .weights import ModelWeights, init_weights, matching_core

__all__ = [
    "CostVolume",
    "DisparityMap",
    "InferenceResult",
    "ModelWeights",
    "RunConfig",
    "build_gwc_volume",
    "infer",
    "init_weights",
    "matching_core",
]
