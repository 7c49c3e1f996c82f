"""Per-arm sufficient statistics and the regularized ridge estimate.

An arm only ever sees aggregated statistics: the sample count n, the Gram
matrix A accumulating x x^T over recorded steps, and b accumulating r*x.
The estimate solves (I/sqrt(n) + A/n) theta = b/n; the regularization weight
is recomputed from the current n at every solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatchError, SymMat, rank1_update, spd_solve

NORM_SLACK = 1e-9


class NoDataError(ValueError):
    """Raised when an estimate is requested for an arm with no recorded samples."""


@dataclass
class Estimate:
    theta_hat: np.ndarray
    n_used: int


class ArmState:
    """Sufficient statistics of one arm's recorded (context, reward) history.

    The ridge solution is cached and invalidated on record, so repeated
    solves between records are free and bit-identical.
    """

    __slots__ = ("d", "n", "A", "b", "dirty", "cached_theta", "enforce_unit_norm")

    def __init__(self, d, enforce_unit_norm=True):
        self.d = d
        self.n = 0
        self.A = SymMat.zeros(d)
        self.b = np.zeros(d)
        self.dirty = True
        self.cached_theta = None
        self.enforce_unit_norm = enforce_unit_norm

    def lambda_n(self):
        if self.n == 0:
            raise NoDataError("no recorded samples")
        return 1.0 / math.sqrt(self.n)

    def regularized_gram(self):
        """lambda_n * I + A / n as a SymMat."""
        lam = self.lambda_n()
        m = self.A.a / self.n
        m[np.diag_indices(self.d)] += lam
        return SymMat._wrap(m)


def record(s, x, r):
    """Fold one (context, reward) sample into the arm's statistics."""
    x = np.asarray(x, dtype=float)
    if x.shape != (s.d,):
        raise DimensionMismatchError(f"context of shape {x.shape}, arm dimension {s.d}")
    if not math.isfinite(r):
        raise ValueError(f"non-finite reward {r}")
    if s.enforce_unit_norm and float(x @ x) > (1.0 + NORM_SLACK) ** 2:
        raise ValueError("context norm exceeds 1 (pass enforce_unit_norm=False for raw supports)")
    s.n += 1
    s.A = rank1_update(s.A, x)
    s.b = s.b + r * x
    s.dirty = True
    return s


def ridge_solve(s):
    """Regularized least-squares estimate from the arm's current statistics."""
    if s.n == 0:
        raise NoDataError("cannot estimate an arm with no recorded samples")
    if not s.dirty and s.cached_theta is not None:
        return Estimate(s.cached_theta, s.n)
    theta = spd_solve(s.regularized_gram(), s.b / s.n)
    s.cached_theta = theta
    s.dirty = False
    return Estimate(theta, s.n)


def predict(e, x):
    x = np.asarray(x, dtype=float)
    if x.shape != e.theta_hat.shape:
        raise DimensionMismatchError("context/estimate dimension mismatch")
    return float(x @ e.theta_hat)


def confidence_width(s, x):
    """sqrt(x^T M^-2 x) with M = lambda_n I + A/n, via w = M^-1 x, ||w||_2."""
    if s.n == 0:
        raise NoDataError("cannot compute a width with no recorded samples")
    x = np.asarray(x, dtype=float)
    if x.shape != (s.d,):
        raise DimensionMismatchError("context/arm dimension mismatch")
    w = spd_solve(s.regularized_gram(), x)
    return math.sqrt(float(w @ w))


def snapshot(s):
    """Flat checkpoint record: (d, n, upper triangle of A row-major, b)."""
    return (s.d, s.n, s.A.upper_triangle(), s.b.copy())


def restore(snap, enforce_unit_norm=True):
    d, n, upper, b = snap
    s = ArmState(d, enforce_unit_norm=enforce_unit_norm)
    s.n = int(n)
    s.A = SymMat.from_upper_triangle(d, upper)
    s.b = np.asarray(b, dtype=float).copy()
    s.dirty = True
    return s
