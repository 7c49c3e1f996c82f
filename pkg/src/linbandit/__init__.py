"""Contextual linear bandits: epsilon-greedy with per-arm online ridge
regression, an exhaustive-subset UCB toy, calibration helpers, and a
reproducible simulation harness."""

__version__ = "0.1.0"

from . import calibration, environment, estimator, harness, linalg, policy

__all__ = [
    "__version__",
    "calibration",
    "environment",
    "estimator",
    "harness",
    "linalg",
    "policy",
]
