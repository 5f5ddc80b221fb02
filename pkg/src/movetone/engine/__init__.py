"""Differentiable array engine: tape, parameter store, layers, grad checks."""

from movetone.engine.gradcheck import GradientReport, ProbeError, check_gradients
from movetone.engine.params import ParameterStore
from movetone.engine.tensor import DimensionError, Tensor

__all__ = [
    "DimensionError",
    "GradientReport",
    "ParameterStore",
    "ProbeError",
    "Tensor",
    "check_gradients",
]
