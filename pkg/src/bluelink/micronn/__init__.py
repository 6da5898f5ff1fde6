"""Self-contained miniature neural-network engine on numpy.

Tensors are numpy arrays (activations in NCHW layout), layers implement
forward/backward with cached intermediates, gradients flow by reverse-mode
chain rule, and Adam drives training.  No external ML framework is used.
"""

from .layers import BatchNorm2d, Conv2d, Dense, Layer, ReLU, Sigmoid
from .net import (
    LayerNumericsError,
    LayerSpec,
    ModelSpec,
    Network,
    backward,
    bce_loss,
    build_network,
)
from .train import Adam, EpochStats, TrainConfig, TrainingDiverged, train
from .serialize import load_model, save_model
from .gradcheck import max_relative_gradient_error

__all__ = [
    "Adam",
    "BatchNorm2d",
    "Conv2d",
    "Dense",
    "EpochStats",
    "Layer",
    "LayerNumericsError",
    "LayerSpec",
    "ModelSpec",
    "Network",
    "ReLU",
    "Sigmoid",
    "TrainConfig",
    "TrainingDiverged",
    "backward",
    "bce_loss",
    "build_network",
    "load_model",
    "max_relative_gradient_error",
    "save_model",
    "train",
]
