"""Reconstruction of artwork hidden beneath paintings.

The pipeline: prepare an x-radiograph (contrast, curator mask, harmonic
inpainting), then optimize an image whose features match the edited
radiograph (content) and whose Gram statistics match a chosen painting
(style). Ships with a CLI and an HTTP job service.
"""

from .errors import (
    ConfigError,
    DecodeError,
    NumericError,
    PentimentoError,
    ShapeError,
    StageError,
    WeightFormatError,
    WeightTruncationError,
)
from .losses import (
    GramMatrix,
    LossBreakdown,
    LossConfig,
    content_loss,
    gram,
    style_loss,
    total_loss,
    tv_loss,
)
from .network import FeatureExtractor, LayerSpec, NetworkSpec, vgg16_spec
from .ops import ConvParams
from .reconstruct import (
    OptimizerConfig,
    ReconstructionConfig,
    RunReport,
    init_image,
    run,
)
from .weights import LayerWeights, WeightStore, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DecodeError",
    "NumericError",
    "PentimentoError",
    "ShapeError",
    "StageError",
    "WeightFormatError",
    "WeightTruncationError",
    "GramMatrix",
    "LossBreakdown",
    "LossConfig",
    "content_loss",
    "gram",
    "style_loss",
    "total_loss",
    "tv_loss",
    "FeatureExtractor",
    "LayerSpec",
    "NetworkSpec",
    "vgg16_spec",
    "ConvParams",
    "OptimizerConfig",
    "ReconstructionConfig",
    "RunReport",
    "init_image",
    "run",
    "LayerWeights",
    "WeightStore",
    "load_weights",
    "save_weights",
    "__version__",
]
