"""Command-line entry point for running simulations.

Either --config or --scenario selects the experiment; --seed/--reps/--out/
--policy override it. Output is a CSV with a key=value header block holding
the calibration report, version, and seed; --plot additionally renders regret
and mode-count figures next to the CSV.

Exit codes: 0 success, 1 runtime error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, calibration, environment, harness


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="linbandit",
        description="Contextual linear bandit simulations with reproducible regret traces.",
    )
    parser.add_argument("--config", metavar="PATH", help="run config file (key = value sections)")
    parser.add_argument(
        "--scenario",
        metavar="NAME",
        help="preset overriding the config: fig1a | fig1b:I | scaling:d,K | twocontext:I",
    )
    parser.add_argument("--seed", type=int, metavar="N", help="base seed (replication i uses seed+i)")
    parser.add_argument("--reps", type=int, metavar="N", help="replication count")
    parser.add_argument("--out", metavar="PATH", help="output CSV path")
    parser.add_argument(
        "--policy", choices=("eps", "ucb", "uniform"), help="policy override"
    )
    parser.add_argument(
        "--plot", action="store_true", help="render PNG figures next to the CSV"
    )
    return parser


def _calibration_header(config):
    """Exact instance quantities where enumerable, with the resulting p bounds."""
    env = config.environment
    lines = []
    try:
        pts, _ = environment.support(env)
        sigma = environment.exact_sigma_min(env)
        delta_min, delta_max = environment.exact_gaps(env.thetas, pts)
    except (environment.DegenerateInstanceError, environment.SupportTooLargeError, TypeError) as exc:
        lines.append(f"calibration_note = unavailable ({exc})")
        return lines
    L_hat = 1.0  # bounded-reward models; clamp floor of the L' convention
    if isinstance(env.reward_model, environment.AdditiveNoise):
        L_hat = max(1.0, env.reward_model.scale)
    report = calibration.CalibrationReport(
        sigma_min_hat=sigma,
        delta_min_hat=delta_min,
        delta_max_hat=delta_max,
        L_hat=L_hat,
        p_theorem=calibration.p_theorem_bound(env.K, L_hat, delta_min, sigma),
        p_strict=calibration.p_strict_bound(env.K, L_hat, delta_min, sigma),
    )
    lines.extend(report.header_lines())
    pol = config.policy
    if isinstance(pol, (harness.EpsPolicySpec, harness.UcbPolicySpec)):
        regimes = []
        if pol.p >= 32 * env.K:
            regimes.append("32K")
        if pol.p >= report.p_theorem:
            regimes.append("theorem")
        if pol.p >= report.p_strict:
            regimes.append("strict")
        lines.append(f"p = {pol.p}")
        lines.append("p_satisfies = " + (",".join(regimes) if regimes else "none"))
    return lines


def _policy_override(config, name):
    K = config.environment.K
    if name == "eps":
        if isinstance(config.policy, harness.EpsPolicySpec):
            return config
        p = config.policy.p if isinstance(config.policy, harness.UcbPolicySpec) else 32 * K
        return replace(config, policy=harness.EpsPolicySpec(p=p))
    if name == "ucb":
        p = config.policy.p if isinstance(config.policy, harness.EpsPolicySpec) else 32 * K
        return replace(config, policy=harness.UcbPolicySpec(p=p))
    return replace(config, policy=harness.UniformPolicySpec())


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.config is None and args.scenario is None:
        parser.print_usage(sys.stderr)
        print("error: one of --config or --scenario is required", file=sys.stderr)
        return 2
    try:
        if args.scenario is not None:
            config = harness.scenario_config(
                args.scenario,
                seed=args.seed if args.seed is not None else 7,
                reps=args.reps if args.reps is not None else 10,
            )
        else:
            config = harness.read_config(args.config)
            if args.seed is not None:
                config = replace(config, base_seed=args.seed)
            if args.reps is not None:
                config = replace(config, reps=args.reps)
        if args.policy is not None:
            config = _policy_override(config, args.policy)
    except (harness.ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = args.out or config.out_path
    if out is None:
        stem = args.scenario.replace(":", "_").replace(",", "_") if args.scenario else Path(args.config).stem
        out = f"{stem}.csv"

    try:
        trace = harness.replicate(config)
        header = [
            f"version = linbandit {__version__}",
            f"seed = {config.base_seed}",
            f"reps = {config.reps}",
            f"T = {config.T}",
            f"policy = {type(config.policy).__name__}",
        ]
        if args.scenario:
            header.append(f"scenario = {args.scenario}")
        header.extend(_calibration_header(config))
        harness.write_csv(trace, out, header)
        print(f"wrote {out}")
        if args.plot:
            from . import report

            base = Path(out).with_suffix("")
            fig1 = report.render_regret_figure(trace, f"{base}_regret.png", title=args.scenario)
            fig2 = report.render_mode_counts_figure(trace, f"{base}_modes.png", title=args.scenario)
            print(f"wrote {fig1}")
            print(f"wrote {fig2}")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
