"""Experiment orchestration: seeded replicated runs, regret aggregation,
log-fit diagnostics, config parsing, and CSV emission.

Replication i runs with seed base_seed + i, so replications are independent
and embarrassingly parallel; LINBANDIT_THREADS > 1 (or 0 for auto) fans them
out over processes. A run's CSV is a deterministic function of (config,
base_seed) apart from the version string in the header.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import environment, estimator, policy

CSV_COLUMNS = "t,mean_regret,std_regret,explore_count_mean,exploit_count_mean"
DENSE_LOG_MAX_T = 10**5
CHECKPOINT_RATIO = 1.05

_MODE_CODE = {policy.WARMUP: 0, policy.EXPLORE: 1, policy.EXPLOIT: 2}


class ConfigError(ValueError):
    pass


@dataclass
class EpsPolicySpec:
    p: int


@dataclass
class UcbPolicySpec:
    p: int
    history_cap: int = 12


@dataclass
class UniformPolicySpec:
    pass


@dataclass
class RunConfig:
    environment: environment.EnvironmentSpec
    policy: object
    T: int
    reps: int = 1
    base_seed: int = 0
    out_path: str | None = None
    checkpoints: tuple = ()

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError(f"need T >= 1, got {self.T}")
        if self.reps < 1:
            raise ConfigError(f"need reps >= 1, got {self.reps}")


@dataclass
class RegretTrace:
    cumulative: np.ndarray  # realized cumulative regret, one entry per step
    modes: np.ndarray  # uint8 codes: 0 warmup, 1 explore, 2 exploit
    arms: np.ndarray
    arm_counts: np.ndarray | None  # recorded samples per arm at T (None for uniform)
    snapshots: dict = field(default_factory=dict)  # t -> per-arm ArmState snapshots
    seed: int = 0


@dataclass
class AggregateTrace:
    t: np.ndarray
    mean_regret: np.ndarray
    std_regret: np.ndarray
    explore_count_mean: np.ndarray
    exploit_count_mean: np.ndarray
    reps: int


def _make_policy_state(config):
    env = config.environment
    spec = config.policy
    if isinstance(spec, EpsPolicySpec):
        cfg = policy.EpsGreedyConfig(
            K=env.K, d=env.d, p=spec.p,
            enforce_unit_norm=env.unit_norm_enforced,
        )
        return policy.PolicyState(cfg)
    if isinstance(spec, UcbPolicySpec):
        return policy.UcbState(policy.UcbConfig(env.K, env.d, spec.p, spec.history_cap))
    if isinstance(spec, UniformPolicySpec):
        return None
    raise ConfigError(f"unknown policy spec {type(spec).__name__}")


def run_one(config, seed):
    """One full simulated run: sample context, act, sample reward, feed, accrue."""
    env = config.environment
    T = config.T
    env_rng, reward_rng, policy_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    ]
    contexts = environment.sample_contexts(env, T, env_rng)
    state = _make_policy_state(config)
    uniform = state is None
    ucb = isinstance(state, policy.UcbState)
    ledger = environment.RegretLedger(env.K)
    modes = np.empty(T, dtype=np.uint8)
    arms = np.empty(T, dtype=np.int32)
    snapshots = {}
    want_snaps = set(config.checkpoints)
    for t in range(1, T + 1):
        x = contexts[t - 1]
        if uniform:
            action = policy.uniform_policy_step(env.K, policy_rng)
            action.t = t
        elif ucb:
            action = policy.ucb_step(state, x)
        else:
            action = policy.eps_greedy_step(state, x, policy_rng)
        r = environment.sample_reward(env, action.arm, x, reward_rng)
        if ucb:
            policy.ucb_feed(state, action, x, r)
        elif not uniform:
            policy.feed(state, action, x, r)
        environment.accrue(ledger, t, x, action, env.thetas)
        modes[t - 1] = _MODE_CODE[action.mode]
        arms[t - 1] = action.arm
        if t in want_snaps and isinstance(state, policy.PolicyState):
            snapshots[t] = [estimator.snapshot(s) for s in state.arm_states]
    arm_counts = state.recorded_counts() if isinstance(state, policy.PolicyState) else None
    return RegretTrace(
        cumulative=np.asarray(ledger.cumulative),
        modes=modes,
        arms=arms,
        arm_counts=arm_counts,
        snapshots=snapshots,
        seed=seed,
    )


def checkpoint_grid(T):
    """Every step for T <= 1e5; otherwise a 1.05-ratio geometric grid ending at T."""
    if T <= DENSE_LOG_MAX_T:
        return np.arange(1, T + 1)
    ts = [1]
    while ts[-1] < T:
        ts.append(min(T, max(ts[-1] + 1, int(ts[-1] * CHECKPOINT_RATIO))))
    return np.asarray(ts)


def _worker(args):
    config, seed = args
    return run_one(config, seed)


def _n_workers():
    raw = os.environ.get("LINBANDIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"LINBANDIT_THREADS must be an integer, got {raw!r}")
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def replicate(config):
    """Run reps independent replications (seeds base_seed + i) and aggregate."""
    seeds = [config.base_seed + i for i in range(config.reps)]
    workers = _n_workers()
    if workers > 1 and config.reps > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.reps)) as pool:
            traces = list(pool.map(_worker, [(config, s) for s in seeds]))
    else:
        traces = [run_one(config, s) for s in seeds]
    return aggregate(traces, config.T)


def aggregate(traces, T):
    grid = checkpoint_grid(T)
    gi = grid - 1
    regrets = np.vstack([tr.cumulative[gi] for tr in traces])
    explore = np.vstack([np.cumsum(tr.modes <= 1)[gi] for tr in traces])
    exploit = np.vstack([np.cumsum(tr.modes == 2)[gi] for tr in traces])
    reps = len(traces)
    std = regrets.std(axis=0, ddof=1) if reps > 1 else np.zeros(grid.size)
    return AggregateTrace(
        t=grid,
        mean_regret=regrets.mean(axis=0),
        std_regret=std,
        explore_count_mean=explore.mean(axis=0),
        exploit_count_mean=exploit.mean(axis=0),
        reps=reps,
    )


def log_fit(trace, tail_fraction):
    """Least-squares fit of mean regret against ln t over the tail of the run.

    Returns (slope, intercept, r_squared).
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    T = int(trace.t[-1])
    mask = trace.t >= (1.0 - tail_fraction) * T
    ts = trace.t[mask]
    ys = trace.mean_regret[mask]
    if ts.size < 10:
        raise ValueError(f"tail holds {ts.size} points; need at least 10")
    if ts[0] == ts[-1]:
        raise ValueError("degenerate tail: constant t")
    lt = np.log(ts)
    slope, intercept = np.polyfit(lt, ys, 1)
    resid = ys - (slope * lt + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


def write_csv(trace, path, header_lines=()):
    """Emit the aggregate trace; header lines go out as '# ...' comments."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(CSV_COLUMNS + "\n")
        for i in range(trace.t.size):
            fh.write(
                f"{int(trace.t[i])},{trace.mean_regret[i]:.10g},"
                f"{trace.std_regret[i]:.10g},{trace.explore_count_mean[i]:.10g},"
                f"{trace.exploit_count_mean[i]:.10g}\n"
            )


# ---------------------------------------------------------------------------
# config file parsing: UTF-8 "key = value" lines under [section] headers


_KNOWN_KEYS = {
    "environment": {
        "kind", "d", "K", "q", "I", "x_rare", "x_common",
        "theta_seed", "thetas", "reward", "unit_norm",
    },
    "policy": {"kind", "p", "history_cap"},
    "run": {"T", "reps", "base_seed", "out", "checkpoints"},
}


def _parse_sections(path):
    sections = {name: {} for name in _KNOWN_KEYS}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if current not in _KNOWN_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown section [{current}]")
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            if current is None:
                raise ConfigError(f"{path}:{lineno}: key outside any [section]")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _KNOWN_KEYS[current]:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in [{current}]")
            if key in sections[current]:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r} in [{current}]")
            sections[current][key] = value
    return sections


def _get(section, key, conv, default=None, required=False, where=""):
    if key not in section:
        if required:
            raise ConfigError(f"missing required key {key!r} in [{where}]")
        return default
    try:
        return conv(section[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r} in [{where}]: {exc}") from exc


def _parse_vector(s):
    return np.array([float(v) for v in s.split(",")])


def _parse_bool(s):
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _build_environment(sec):
    kind = _get(sec, "kind", str, required=True, where="environment")
    d = _get(sec, "d", int, required=True, where="environment")
    K = _get(sec, "K", int, required=True, where="environment")
    if kind == "bernoulli":
        dist = environment.BernoulliNormalized(_get(sec, "q", float, 0.5, where="environment"))
    elif kind == "twocontext":
        I = _get(sec, "I", float, required=True, where="environment")
        default_rare = (1.0,) * d
        default_common = tuple(1.0 if i % 2 == 0 else 0.0 for i in range(d))
        x_rare = _get(sec, "x_rare", _parse_vector, np.array(default_rare), where="environment")
        x_common = _get(sec, "x_common", _parse_vector, np.array(default_common), where="environment")
        dist = environment.two_context(I, x_rare, x_common)
    else:
        raise ConfigError(f"unknown environment kind {kind!r}")

    if "thetas" in sec:
        thetas = np.vstack([_parse_vector(row) for row in sec["thetas"].split(";")])
    else:
        theta_seed = _get(sec, "theta_seed", int, 0, where="environment")
        thetas, _ = environment.normalized_gaussian_thetas(
            K, d, np.random.default_rng(theta_seed)
        )

    reward = _get(sec, "reward", str, "uniform", where="environment")
    if reward == "uniform":
        model = environment.UniformScaled()
    elif reward.startswith("gaussian:"):
        model = environment.AdditiveNoise("gaussian", float(reward.split(":", 1)[1]))
    elif reward.startswith("uniformnoise:"):
        model = environment.AdditiveNoise("uniform", float(reward.split(":", 1)[1]))
    elif reward.startswith("fluct:"):
        model = environment.ParameterFluctuation(float(reward.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown reward model {reward!r}")

    if "unit_norm" in sec:
        unit_norm = _parse_bool(sec["unit_norm"])
    elif isinstance(dist, environment.FiniteSupport):
        # infer: enforce only when the support actually satisfies the bound
        unit_norm = bool(np.all(np.linalg.norm(dist.points, axis=1) <= 1.0 + 1e-9))
    else:
        unit_norm = True
    try:
        return environment.EnvironmentSpec(
            d=d, K=K, context_dist=dist, thetas=thetas,
            reward_model=model, unit_norm_enforced=unit_norm,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_policy(sec):
    kind = _get(sec, "kind", str, "eps", where="policy")
    if kind == "eps":
        return EpsPolicySpec(p=_get(sec, "p", int, required=True, where="policy"))
    if kind == "ucb":
        return UcbPolicySpec(
            p=_get(sec, "p", int, required=True, where="policy"),
            history_cap=_get(sec, "history_cap", int, 12, where="policy"),
        )
    if kind == "uniform":
        return UniformPolicySpec()
    raise ConfigError(f"unknown policy kind {kind!r}")


def read_config(path):
    sections = _parse_sections(path)
    run = sections["run"]
    checkpoints = _get(
        run, "checkpoints",
        lambda s: tuple(int(v) for v in s.split(",")) if s.strip() else (),
        (), where="run",
    )
    try:
        return RunConfig(
            environment=_build_environment(sections["environment"]),
            policy=_build_policy(sections["policy"]),
            T=_get(run, "T", int, required=True, where="run"),
            reps=_get(run, "reps", int, 1, where="run"),
            base_seed=_get(run, "base_seed", int, 0, where="run"),
            out_path=_get(run, "out", str, None, where="run"),
            checkpoints=checkpoints,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def write_config(config, path):
    """Serialize a RunConfig back to the key=value format (round-trippable for
    finite-support environments with explicit thetas)."""
    env = config.environment
    lines = ["[environment]"]
    if isinstance(env.context_dist, environment.BernoulliNormalized):
        lines += ["kind = bernoulli", f"q = {env.context_dist.q:.10g}"]
    elif isinstance(env.context_dist, environment.FiniteSupport):
        probs = env.context_dist.probs
        if len(probs) != 2:
            raise ConfigError("only two-point finite supports serialize to configs")
        lines += [
            "kind = twocontext",
            f"I = {1.0 / probs[0]:.10g}",
            "x_rare = " + ",".join(f"{v:.10g}" for v in env.context_dist.points[0]),
            "x_common = " + ",".join(f"{v:.10g}" for v in env.context_dist.points[1]),
        ]
    else:
        raise ConfigError(f"cannot serialize {type(env.context_dist).__name__}")
    lines += [f"d = {env.d}", f"K = {env.K}"]
    lines.append(
        "thetas = " + ";".join(",".join(f"{v:.17g}" for v in row) for row in env.thetas)
    )
    model = env.reward_model
    if isinstance(model, environment.UniformScaled):
        lines.append("reward = uniform")
    elif isinstance(model, environment.AdditiveNoise):
        tag = "gaussian" if model.kind == "gaussian" else "uniformnoise"
        lines.append(f"reward = {tag}:{model.scale:.10g}")
    else:
        lines.append(f"reward = fluct:{model.F:.10g}")
    lines.append(f"unit_norm = {'true' if env.unit_norm_enforced else 'false'}")

    lines.append("[policy]")
    pol = config.policy
    if isinstance(pol, EpsPolicySpec):
        lines += ["kind = eps", f"p = {pol.p}"]
    elif isinstance(pol, UcbPolicySpec):
        lines += ["kind = ucb", f"p = {pol.p}", f"history_cap = {pol.history_cap}"]
    else:
        lines.append("kind = uniform")

    lines.append("[run]")
    lines += [f"T = {config.T}", f"reps = {config.reps}", f"base_seed = {config.base_seed}"]
    if config.out_path:
        lines.append(f"out = {config.out_path}")
    if config.checkpoints:
        lines.append("checkpoints = " + ",".join(str(t) for t in config.checkpoints))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scenario presets


def scenario_config(name, seed=7, reps=10):
    """Built-in experiment presets selectable from the CLI."""
    theta_rng = np.random.default_rng(seed)
    if name == "fig1a":
        thetas, _ = environment.normalized_gaussian_thetas(6, 3, theta_rng)
        env = environment.EnvironmentSpec(
            d=3, K=6, context_dist=environment.BernoulliNormalized(0.5), thetas=thetas,
        )
        return RunConfig(env, EpsPolicySpec(p=192), T=10**5, reps=reps, base_seed=seed)
    if name.startswith("fig1b:"):
        I = float(name.split(":", 1)[1])
        thetas, _ = environment.normalized_gaussian_thetas(6, 3, theta_rng)
        env = environment.EnvironmentSpec(
            d=3, K=6,
            context_dist=environment.two_context(I, (1.0, 1.0, 1.0), (1.0, 0.0, 1.0)),
            thetas=thetas, unit_norm_enforced=False,
        )
        return RunConfig(env, EpsPolicySpec(p=192), T=10**5, reps=reps, base_seed=seed)
    if name.startswith("twocontext:"):
        I = float(name.split(":", 1)[1])
        thetas, _ = environment.normalized_gaussian_thetas(6, 2, theta_rng)
        env = environment.EnvironmentSpec(
            d=2, K=6, context_dist=environment.two_context(I),
            thetas=thetas, unit_norm_enforced=False,
        )
        return RunConfig(env, EpsPolicySpec(p=192), T=10**4, reps=reps, base_seed=seed)
    if name.startswith("scaling:"):
        from . import calibration

        parts = name.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise ConfigError("scaling scenario takes 'scaling:d,K'")
        d, K = int(parts[0]), int(parts[1])
        scen = calibration.build_scaling_scenario(d, K, w=0.5, F=0.1, rng=theta_rng)
        return RunConfig(scen.spec, EpsPolicySpec(p=32 * K), T=10**4, reps=reps, base_seed=seed)
    raise ConfigError(f"unknown scenario {name!r}")
