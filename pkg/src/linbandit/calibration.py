"""Choosing the exploration scale p, and online estimation of the quantities
that feed it (smallest covariance eigenvalue, smallest optimality gap,
reward-noise scale).

Two regimes are exposed: the single-constant bound C*K*L'^2/(Delta'^2 Sigma'^2)
with a configurable C (optimistic default C=1), and the strict triple of
conditions with explicit constants 128 / 16 / 32 that the regret analysis
actually needs. Both round up to a multiple of K so the warm-up balances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import DEFAULT_RANK_TOL, SymMat, min_nonzero_eigenvalue
from . import environment

QUANT = 1e-9  # context grouping resolution for the noise-scale estimate


class NoExploitStepsError(ValueError):
    pass


@dataclass
class CalibrationReport:
    sigma_min_hat: float
    delta_min_hat: float
    delta_max_hat: float
    L_hat: float
    p_theorem: int
    p_strict: int
    samples_used: dict = field(default_factory=dict)

    def header_lines(self):
        """Flat key=value block for embedding in a run's output header."""
        lines = [
            f"sigma_min_hat = {self.sigma_min_hat:.10g}",
            f"delta_min_hat = {self.delta_min_hat:.10g}",
            f"delta_max_hat = {self.delta_max_hat:.10g}",
            f"L_hat = {self.L_hat:.10g}",
            f"p_theorem = {self.p_theorem}",
            f"p_strict = {self.p_strict}",
        ]
        for k in sorted(self.samples_used):
            lines.append(f"samples_{k} = {self.samples_used[k]}")
        return lines


def _clamped(L, delta_min, sigma_min):
    return max(1.0, L), min(1.0, delta_min), min(1.0, sigma_min)


def _round_up_multiple(value, K):
    return int(math.ceil(value / K - 1e-12)) * K


def p_theorem_bound(K, L, delta_min, sigma_min, C=1.0):
    """Smallest multiple of K at least C*K*L'^2 / (Delta'_min^2 Sigma'_min^2)."""
    if K < 1 or L <= 0 or delta_min <= 0 or sigma_min <= 0 or C <= 0:
        raise ValueError("all calibration inputs must be positive")
    Lp, dp, sp = _clamped(L, delta_min, sigma_min)
    return _round_up_multiple(C * K * Lp**2 / (dp**2 * sp**2), K)


def p_strict_bound(K, L, delta_min, sigma_min, C_abs=1.0):
    """Smallest multiple of K meeting all three strict conditions:
    128*K*L'^2/(Delta'^2 Sigma'^2), 16*K/(C_abs*Sigma'^2), and 32*K."""
    if K < 1 or L <= 0 or delta_min <= 0 or sigma_min <= 0:
        raise ValueError("all calibration inputs must be positive")
    if not 0.0 < C_abs <= 1.0:
        raise ValueError(f"C_abs must lie in (0, 1], got {C_abs}")
    Lp, dp, sp = _clamped(L, delta_min, sigma_min)
    need = max(
        128.0 * K * Lp**2 / (dp**2 * sp**2),
        16.0 * K / (C_abs * sp**2),
        32.0 * K,
    )
    return _round_up_multiple(need, K)


def estimate_sigma_min(contexts, rank_tol=DEFAULT_RANK_TOL):
    """Smallest nonzero eigenvalue of the empirical covariance (1/n) sum x x^T."""
    X = np.atleast_2d(np.asarray(contexts, dtype=float))
    n, d = X.shape
    if n < d:
        raise ValueError(f"need at least d={d} context samples, got {n}")
    return min_nonzero_eigenvalue(SymMat((X.T @ X) / n), rank_tol)


class ExploitGapTracker:
    """Running minimum of (best - second best) predicted reward over exploit
    steps; exact ties are excluded from the minimum and counted separately."""

    def __init__(self):
        self.minimum = math.inf
        self.steps = 0
        self.ties = 0

    def update(self, predictions):
        preds = np.asarray(predictions, dtype=float)
        if preds.size < 2:
            raise ValueError("need at least two arms to define a gap")
        top, second = np.sort(preds)[-2:][::-1]
        self.steps += 1
        if top == second:
            self.ties += 1
        else:
            self.minimum = min(self.minimum, float(top - second))


def estimate_delta_min(exploit_predictions):
    """Running-minimum gap estimate over a trace of exploit-step predictions."""
    tracker = ExploitGapTracker()
    for preds in exploit_predictions:
        tracker.update(preds)
    if tracker.steps == 0:
        raise NoExploitStepsError("no exploit steps observed yet")
    if not math.isfinite(tracker.minimum):
        raise ValueError("only exact ties observed; gap estimate undefined")
    return tracker.minimum


def _group_key(x, arm):
    return (arm,) + tuple(int(round(v / QUANT)) for v in np.asarray(x, float))

def estimate_L(samples):
    """Sub-gaussian scale proxy: max sample standard deviation over groups of
    rewards sharing the same (context, arm) pair, clamped to >= 1.

    ``samples`` is an iterable of (context, arm, reward); contexts are grouped
    by exact equality at 1e-9 quantization.
    """
    groups = {}
    for x, arm, r in samples:
        groups.setdefault(_group_key(x, arm), []).append(float(r))
    sds = [np.std(v, ddof=1) for v in groups.values() if len(v) >= 2]
    if not sds:
        raise ValueError("no (context, arm) group has at least two observations")
    return max(1.0, float(max(sds)))


@dataclass
class ScalingScenario:
    d: int
    K: int
    w: float
    F: float
    spec: environment.EnvironmentSpec


def build_scaling_scenario(d, K, w, F, rng):
    """Bernoulli(w)-normalized contexts, uniform-entry normalized arm
    parameters, and rewards x^T Theta_a with per-entry fluctuation in [-F, F]."""
    if not 0.0 < w <= 1.0:
        raise ValueError(f"w must lie in (0, 1], got {w}")
    if F < 0:
        raise ValueError("F must be nonnegative")
    thetas = rng.random((K, d))
    thetas /= np.linalg.norm(thetas, axis=1)[:, None]
    spec = environment.EnvironmentSpec(
        d=d,
        K=K,
        context_dist=environment.BernoulliNormalized(w),
        thetas=thetas,
        reward_model=environment.ParameterFluctuation(F),
    )
    return ScalingScenario(d, K, w, F, spec)
