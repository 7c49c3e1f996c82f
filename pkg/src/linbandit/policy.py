"""Arm-selection policies.

Three policies live here: the epsilon-greedy policy with a p/t exploration
schedule and round-robin warm-up, an exhaustive-subset UCB variant kept at
toy scale by a per-arm history cap, and a uniform-random control.

Arm indices are 1-based everywhere, matching the warm-up rule
``a = 1 + (t mod K)`` taken literally. All argmax/argmin ties break to the
lowest index so traces are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import estimator
from .linalg import DimensionMismatchError, SymMat, spd_solve

WARMUP = "warmup"
EXPLORE = "explore"
EXPLOIT = "exploit"


class StaleActionError(ValueError):
    """Raised when feeding an action produced at a different time step."""


@dataclass
class Action:
    t: int | None
    arm: int
    mode: str
    coin_probability: float = 1.0

    def log_record(self):
        """Flat record appended to the harness action trace."""
        return (self.t, self.mode, self.arm, self.coin_probability)


def _validate_p(K, p):
    if K < 1:
        raise ValueError(f"need at least one arm, got K={K}")
    if p < K or p % K != 0:
        raise ValueError(f"p must be a positive multiple of K, got p={p}, K={K}")


@dataclass
class EpsGreedyConfig:
    K: int
    d: int
    p: int
    seed: int = 0
    enforce_unit_norm: bool = True

    def __post_init__(self):
        _validate_p(self.K, self.p)
        if self.d < 1:
            raise ValueError(f"need d >= 1, got {self.d}")


class PolicyState:
    """Mutable epsilon-greedy state: the clock t and one ArmState per arm."""

    def __init__(self, config):
        self.config = config
        self.t = 1
        self.arm_states = [
            estimator.ArmState(config.d, enforce_unit_norm=config.enforce_unit_norm)
            for _ in range(config.K)
        ]
        self._theta_mat = None

    def theta_matrix(self):
        """Stacked (K, d) ridge estimates; rebuilt only for arms touched since
        the last solve."""
        if self._theta_mat is None:
            self._theta_mat = np.vstack(
                [estimator.ridge_solve(s).theta_hat for s in self.arm_states]
            )
        else:
            for i, s in enumerate(self.arm_states):
                if s.dirty:
                    self._theta_mat[i] = estimator.ridge_solve(s).theta_hat
        return self._theta_mat

    def recorded_counts(self):
        return np.array([s.n for s in self.arm_states])


def warmup_arm(t, K):
    """Round-robin arm for the warm-up phase: 1 + (t mod K)."""
    if t < 1:
        raise ValueError(f"time steps are 1-based, got t={t}")
    return 1 + (t % K)


def explore_coin(t, p, rng):
    """Bernoulli(p/t) exploration coin; only valid after the warm-up."""
    if t <= p:
        raise ValueError(f"explore_coin called at t={t} <= p={p} (warm-up regime)")
    return 1 if rng.random() < p / t else 0


def greedy_arm(x, estimates):
    """Lowest index maximizing the predicted reward x^T theta_hat."""
    preds = [estimator.predict(e, x) for e in estimates]
    return int(np.argmax(preds)) + 1


def eps_greedy_step(s, x, rng):
    """Select an action for the current step; does not record the reward."""
    cfg = s.config
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.d,):
        raise DimensionMismatchError(f"context of shape {x.shape}, expected ({cfg.d},)")
    t = s.t
    if t <= cfg.p:
        return Action(t, warmup_arm(t, cfg.K), WARMUP)
    prob = cfg.p / t
    if explore_coin(t, cfg.p, rng):
        return Action(t, 1 + int(rng.integers(cfg.K)), EXPLORE, prob)
    preds = s.theta_matrix() @ x
    return Action(t, int(np.argmax(preds)) + 1, EXPLOIT, prob)


def feed(s, action, x, r):
    """Advance the clock; record (x, r) only for warm-up/explore actions."""
    if action.t != s.t:
        raise StaleActionError(f"action from t={action.t} fed at t={s.t}")
    if action.mode in (WARMUP, EXPLORE):
        estimator.record(s.arm_states[action.arm - 1], x, r)
    s.t += 1
    return s


@dataclass
class UcbConfig:
    K: int
    d: int
    p: int
    history_cap: int = 12

    def __post_init__(self):
        _validate_p(self.K, self.p)
        if not 1 <= self.history_cap <= 20:
            raise ValueError(
                f"history_cap must lie in [1, 20] (exhaustive search guard), got {self.history_cap}"
            )


class UcbState:
    """Per-arm FIFO-capped history of raw (context, reward) samples."""

    def __init__(self, config):
        self.config = config
        self.t = 1
        self.histories = [[] for _ in range(config.K)]

    def append(self, arm, x, r):
        h = self.histories[arm - 1]
        h.append((np.asarray(x, dtype=float), float(r)))
        if len(h) > self.config.history_cap:
            h.pop(0)


def _subset_objective(t, X, r_unused, idx, x):
    n = len(idx)
    Xs = X[idx]
    lam = 1.0 / math.sqrt(n)
    M = SymMat(lam * np.eye(x.shape[0]) + (Xs.T @ Xs) / n)
    w = spd_solve(M, x)
    return (math.log(t) / n) * float(w @ w)


def ucb_width(t, history, x):
    """Exhaustive subset minimization of the squared confidence width.

    Scans all 2^n - 1 nonempty subsets of the arm's history in bitmask
    order, applying lambda = 1/sqrt(|T|) per subset. Returns the minimal
    value and the (first) minimizing subset as a tuple of history indices.
    """
    n = len(history)
    if n == 0:
        raise estimator.NoDataError("empty history")
    if t < 2:
        raise ValueError(f"need t >= 2 for the log t factor, got t={t}")
    x = np.asarray(x, dtype=float)
    X = np.vstack([h[0] for h in history])
    best_val = None
    best_idx = None
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        val = _subset_objective(t, X, None, idx, x)
        if best_val is None or val < best_val:
            best_val = val
            best_idx = tuple(idx)
    return best_val, best_idx


def _subset_estimate(history, idx, d):
    n = len(idx)
    Xs = np.vstack([history[i][0] for i in idx])
    rs = np.array([history[i][1] for i in idx])
    lam = 1.0 / math.sqrt(n)
    M = SymMat(lam * np.eye(d) + (Xs.T @ Xs) / n)
    return spd_solve(M, (Xs.T @ rs) / n)


def ucb_step(state, x, t=None):
    """Contextual UCB action: argmax of x^T theta_hat + sqrt(c) where both are
    computed on the subset minimizing the confidence objective."""
    cfg = state.config
    if t is None:
        t = state.t
    elif t != state.t:
        raise StaleActionError(f"requested t={t} but state clock is {state.t}")
    x = np.asarray(x, dtype=float)
    if t <= cfg.p:
        return Action(t, warmup_arm(t, cfg.K), WARMUP)
    scores = np.empty(cfg.K)
    for a in range(cfg.K):
        history = state.histories[a]
        if not history:
            raise estimator.NoDataError(f"arm {a + 1} has an empty history")
        c, idx = ucb_width(t, history, x)
        theta = _subset_estimate(history, idx, cfg.d)
        scores[a] = float(x @ theta) + math.sqrt(c)
    return Action(t, int(np.argmax(scores)) + 1, EXPLOIT)


def ucb_feed(state, action, x, r):
    """Append the played sample to the arm's history (FIFO beyond the cap)."""
    if action.t != state.t:
        raise StaleActionError(f"action from t={action.t} fed at t={state.t}")
    state.append(action.arm, x, r)
    state.t += 1
    return state


def uniform_policy_step(K, rng):
    """Control policy: uniform arm, always treated as exploration."""
    if K < 1:
        raise ValueError(f"need at least one arm, got K={K}")
    return Action(None, 1 + int(rng.integers(K)), EXPLORE)
