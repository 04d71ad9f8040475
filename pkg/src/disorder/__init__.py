"""Bayesian detection of two ordered change points in a Markov sequence."""

from .model import ModelError, ModelSpec, make_model, random_model, tiny_model, validate_model
from .filter import FilterState, init_filter, run_filter, step_filter
from .solver import GridConfig, StoppingPolicy, solve
from .detect import run_detector
from .evaluate import evaluate

__all__ = [
    "ModelError",
    "ModelSpec",
    "make_model",
    "random_model",
    "tiny_model",
    "validate_model",
    "FilterState",
    "init_filter",
    "run_filter",
    "step_filter",
    "GridConfig",
    "StoppingPolicy",
    "solve",
    "run_detector",
    "evaluate",
]
