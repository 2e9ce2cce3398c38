"""Multi-scale attention-plus-convolution encoder for dense action detection, in numpy."""

from .model import ModelConfig, ModelParams, desk_config, estimate_flops, forward, full_scale_config, init_params
from .numerics import Tensor

__all__ = [
    "ModelConfig", "ModelParams", "Tensor", "desk_config", "estimate_flops", "forward",
    "full_scale_config", "init_params",
]

__version__ = "0.1.0"
