"""Variational quantum circuits as physics-informed differential-equation solvers."""
from .ansatz import AnsatzSpec
from .engine import CircuitModel
from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    QPINNError,
    SingularityError,
    StiffnessError,
    UndefinedMetricError,
)
from .featuremap import ChebyshevMap, ProductMap2D
from .optimizer import train
from .problems import make_problem
from .simulator import Gate, Observable, StateVector

__version__ = "0.1.0"

__all__ = [
    "AnsatzSpec",
    "ChebyshevMap",
    "CircuitModel",
    "ConfigurationError",
    "DivergenceError",
    "DomainError",
    "Gate",
    "Observable",
    "ProductMap2D",
    "QPINNError",
    "SingularityError",
    "StateVector",
    "StiffnessError",
    "UndefinedMetricError",
    "make_problem",
    "train",
]
