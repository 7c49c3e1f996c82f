"""Stochastic context/reward generators and ground-truth regret accounting.

Context distributions are finite-support by design so that the exact oracles
(optimal arm, gap constants, smallest nonzero covariance eigenvalue) can
enumerate them. Rewards follow the linear payoff model: the mean is always
x^T theta_a, whatever noise shape sits on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import SymMat, min_nonzero_eigenvalue

MAX_SUPPORT = 10**6
NORM_SLACK = 1e-9


class DegenerateInstanceError(ValueError):
    """All arms identical on the whole support: Delta_min is undefined."""


class SupportTooLargeError(ValueError):
    pass


class OutOfOrderError(ValueError):
    """Ledger fed a step index other than the next consecutive one."""


# ---------------------------------------------------------------------------
# context distributions


@dataclass
class BernoulliNormalized:
    """i.i.d. Bernoulli(q) entries, redrawn until nonzero, then l2-normalized."""

    q: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"q must lie in (0, 1], got {self.q}")


@dataclass
class FiniteSupport:
    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.probs = np.asarray(self.probs, dtype=float)
        if self.points.shape[0] != self.probs.shape[0]:
            raise ValueError("one probability per support point required")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")


def two_context(I, x_rare=(1.0, 1.0), x_common=(1.0, 0.0)):
    """Two-point family: x_rare with probability 1/I, x_common otherwise.

    The default d=2 pair gives the covariance [[1, 1/I], [1/I, 1/I]] whose
    smallest eigenvalue decays like 1/I.
    """
    if I <= 1:
        raise ValueError(f"need I > 1, got {I}")
    return FiniteSupport(
        np.vstack([np.asarray(x_rare, float), np.asarray(x_common, float)]),
        np.array([1.0 / I, 1.0 - 1.0 / I]),
    )


# ---------------------------------------------------------------------------
# reward models


@dataclass
class UniformScaled:
    """Uniform on the interval with endpoints 0 and 2*x^T theta (order-normalized)."""


@dataclass
class AdditiveNoise:
    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")


@dataclass
class ParameterFluctuation:
    """Reward x^T (theta_a + U[-F, F]^d), the fluctuation redrawn each step."""

    F: float = 0.0

    def __post_init__(self):
        if self.F < 0:
            raise ValueError("fluctuation bound must be nonnegative")


# ---------------------------------------------------------------------------
# environment spec


@dataclass
class EnvironmentSpec:
    d: int
    K: int
    context_dist: object
    thetas: np.ndarray
    reward_model: object = field(default_factory=UniformScaled)
    unit_norm_enforced: bool = True

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        if self.thetas.shape != (self.K, self.d):
            raise ValueError(
                f"thetas of shape {self.thetas.shape}, expected ({self.K}, {self.d})"
            )
        norms = np.linalg.norm(self.thetas, axis=1)
        if np.any(norms > 1.0 + NORM_SLACK):
            raise ValueError("arm parameters must satisfy ||theta_a||_2 <= 1")
        if self.unit_norm_enforced and isinstance(self.context_dist, FiniteSupport):
            pnorms = np.linalg.norm(self.context_dist.points, axis=1)
            if np.any(pnorms > 1.0 + NORM_SLACK):
                raise ValueError(
                    "support point with norm > 1; construct with unit_norm_enforced=False "
                    "to reproduce the raw two-context family"
                )


def normalized_gaussian_thetas(K, d, rng):
    """Standard Gaussian arm parameters, jointly rescaled so max ||theta_a|| = 1.

    Returns (thetas, scale): dividing all arms by the same factor keeps the
    payoff model linear, and the factor is reported for fidelity.
    """
    raw = rng.standard_normal((K, d))
    scale = float(np.max(np.linalg.norm(raw, axis=1)))
    if scale <= 0:
        scale = 1.0
    return raw / scale, scale


# ---------------------------------------------------------------------------
# sampling


def sample_context(spec, rng):
    dist = spec.context_dist
    if isinstance(dist, BernoulliNormalized):
        while True:
            bits = (rng.random(spec.d) < dist.q).astype(float)
            s = bits.sum()
            if s > 0:
                return bits / math.sqrt(s)
    if isinstance(dist, FiniteSupport):
        u = rng.random()
        idx = int(np.searchsorted(np.cumsum(dist.probs), u, side="right"))
        return dist.points[min(idx, len(dist.probs) - 1)].copy()
    raise TypeError(f"unknown context distribution {type(dist).__name__}")


def sample_contexts(spec, n, rng):
    """Vectorized batch of n i.i.d. contexts (same distribution as sample_context)."""
    dist = spec.context_dist
    if isinstance(dist, BernoulliNormalized):
        bits = (rng.random((n, spec.d)) < dist.q).astype(float)
        while True:
            zero = bits.sum(axis=1) == 0
            if not zero.any():
                break
            bits[zero] = (rng.random((int(zero.sum()), spec.d)) < dist.q).astype(float)
        return bits / np.sqrt(bits.sum(axis=1))[:, None]
    if isinstance(dist, FiniteSupport):
        idx = np.searchsorted(np.cumsum(dist.probs), rng.random(n), side="right")
        return dist.points[np.minimum(idx, len(dist.probs) - 1)].copy()
    raise TypeError(f"unknown context distribution {type(dist).__name__}")


def sample_reward(spec, a, x, rng):
    """Draw one reward for (1-based) arm a under context x; mean is x^T theta_a."""
    if not 1 <= a <= spec.K:
        raise ValueError(f"arm {a} out of range 1..{spec.K}")
    model = spec.reward_model
    theta = spec.thetas[a - 1]
    m = float(x @ theta)
    if isinstance(model, UniformScaled):
        # 2*m*u covers [0, 2m] for m >= 0 and [2m, 0] for m < 0; mean m either way
        return 2.0 * m * rng.random()
    if isinstance(model, AdditiveNoise):
        if model.kind == "gaussian":
            return m + model.scale * rng.standard_normal()
        return m + rng.uniform(-model.scale, model.scale)
    if isinstance(model, ParameterFluctuation):
        return float(x @ (theta + rng.uniform(-model.F, model.F, spec.d)))
    raise TypeError(f"unknown reward model {type(model).__name__}")


# ---------------------------------------------------------------------------
# exact oracles


def support(spec):
    """(points, probs) of the context distribution; errors if non-enumerable."""
    dist = spec.context_dist
    if isinstance(dist, FiniteSupport):
        return dist.points.copy(), dist.probs.copy()
    if isinstance(dist, BernoulliNormalized):
        d, q = spec.d, dist.q
        if 2**d - 1 > MAX_SUPPORT:
            raise SupportTooLargeError(f"2^{d} - 1 support points exceed {MAX_SUPPORT}")
        points = []
        probs = []
        for mask in range(1, 2**d):
            bits = np.array([(mask >> i) & 1 for i in range(d)], dtype=float)
            k = bits.sum()
            points.append(bits / math.sqrt(k))
            probs.append(q**k * (1.0 - q) ** (d - k))
        probs = np.array(probs)
        return np.vstack(points), probs / probs.sum()
    raise TypeError(f"unknown context distribution {type(dist).__name__}")


def best_arm(x, thetas):
    """Lowest 1-based index maximizing x^T theta_a."""
    return int(np.argmax(np.asarray(thetas) @ np.asarray(x, float))) + 1


def step_regret(x, a, thetas):
    """Instantaneous gap x^T (theta_best - theta_a); zero iff a attains the max."""
    preds = np.asarray(thetas) @ np.asarray(x, float)
    if not 1 <= a <= len(preds):
        raise ValueError(f"arm {a} out of range 1..{len(preds)}")
    return float(np.max(preds) - preds[a - 1])


def exact_gaps(thetas, support_points):
    """(Delta_min, Delta_max) over an enumerable support.

    Delta_max is the largest pairwise parameter distance; Delta_min the
    smallest positive per-context optimality gap. Errors if no context
    separates any pair of arms.
    """
    thetas = np.asarray(thetas, dtype=float)
    pts = np.atleast_2d(np.asarray(support_points, dtype=float))
    if pts.shape[0] > MAX_SUPPORT:
        raise SupportTooLargeError(f"{pts.shape[0]} support points exceed {MAX_SUPPORT}")
    diffs = thetas[:, None, :] - thetas[None, :, :]
    delta_max = float(np.max(np.linalg.norm(diffs, axis=2)))
    preds = pts @ thetas.T  # (m, K)
    gaps = preds.max(axis=1)[:, None] - preds
    positive = gaps[gaps > 0]
    if positive.size == 0:
        raise DegenerateInstanceError("no context separates any pair of arms")
    return float(positive.min()), delta_max


def exact_sigma_min(spec, rank_tol=1e-9):
    """Smallest nonzero eigenvalue of the exact covariance sum_x p(x) x x^T."""
    pts, probs = support(spec)
    sigma = SymMat((pts.T * probs) @ pts)
    return min_nonzero_eigenvalue(sigma, rank_tol)


# ---------------------------------------------------------------------------
# regret accounting


class RegretLedger:
    """Running realized regret plus pull and mode counters for one run."""

    def __init__(self, K):
        self.cumulative = []
        self.per_arm_pulls = np.zeros(K, dtype=np.int64)
        self.per_mode_counts = {"warmup": 0, "explore": 0, "exploit": 0}
        self._next_t = 1

    @property
    def total(self):
        return self.cumulative[-1] if self.cumulative else 0.0


def accrue(ledger, t, x, action, thetas):
    """Append one step's realized regret and update counters."""
    if t != ledger._next_t:
        raise OutOfOrderError(f"expected step {ledger._next_t}, got {t}")
    inc = step_regret(x, action.arm, thetas)
    ledger.cumulative.append(ledger.total + inc)
    ledger.per_arm_pulls[action.arm - 1] += 1
    ledger.per_mode_counts[action.mode] += 1
    ledger._next_t += 1
    return ledger
