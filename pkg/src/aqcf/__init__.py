"""Adaptive quantum-classical fusion transformer."""

from .autograd import Tensor, grad_check
from .errors import AqcfError
from .model import AqcfModel, ModelConfig
from .training import ClippedAdam, LossWeights, TrainSettings, train

__all__ = [
    "AqcfError", "AqcfModel", "ClippedAdam", "LossWeights", "ModelConfig",
    "Tensor", "TrainSettings", "grad_check", "train",
]

__version__ = "0.1.0"
