"""Minimal differentiable layer library used by the pair models."""

from .initializers import xavier_limit, xavier_uniform
from .layers import (
    Activation,
    BatchNorm,
    Conv1D,
    Dense,
    Flatten,
    LSTM,
    Layer,
    MaxPool1D,
    Parameter,
    concat_pair,
    relu,
    sigmoid,
    split_pair,
)

__all__ = [
    "Activation",
    "BatchNorm",
    "Conv1D",
    "Dense",
    "Flatten",
    "LSTM",
    "Layer",
    "MaxPool1D",
    "Parameter",
    "concat_pair",
    "relu",
    "sigmoid",
    "split_pair",
    "xavier_limit",
    "xavier_uniform",
]
