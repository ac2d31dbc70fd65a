"""Exploding doubly stochastic operators induced by measure-preserving maps.

Exact constructions on finite probability spaces and on one-sided Bernoulli
shifts, together with verifiers for their structural properties.
"""

from exploding.errors import DepthBudgetError, UnsupportedModeError, ValidationError
from exploding.weights import CappedWeights, custom_weights, geometric_weights
from exploding.finite_system import FiniteSystem, validate
from exploding.shift_system import BernoulliShift, CylinderFunction, bernoulli_shift
from exploding.operator import ExplodingOperator, LevelFunction, build

__all__ = [
    "BernoulliShift",
    "CappedWeights",
    "CylinderFunction",
    "DepthBudgetError",
    "ExplodingOperator",
    "FiniteSystem",
    "LevelFunction",
    "UnsupportedModeError",
    "ValidationError",
    "bernoulli_shift",
    "build",
    "custom_weights",
    "geometric_weights",
    "validate",
]

__version__ = "0.1.0"
