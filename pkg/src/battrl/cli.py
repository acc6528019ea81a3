"""Command-line interface: data synthesis, training, evaluation, comparison, checks.

Exit codes: 0 success, 1 validation failure (bad inputs, failed verification),
2 usage errors. A ``--config`` file (line-based ``key=value``) overrides
same-named flags after parsing.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from battrl import kernels
from battrl.data import (
    SyntheticSpec,
    WeightsFormatError,
    load_price_series,
    load_profile,
    load_weights,
    parse_config_file,
    save_weights,
    synth_profile,
    write_profile_csvs,
)
from battrl.dqn import TrainConfig, train
from battrl.env import (
    CD_MODE,
    DEFAULT_ACTION_LEVELS,
    LD_MODE,
    BatteryEnv,
    BatteryParams,
    CostParams,
)
from battrl.rainflow import (
    DegradationParams,
    rainflow_decompose,
    read_soc_csv,
    reference_cycle_coefficient,
    write_cycles_csv,
)
from battrl.report import (
    compare_cd_ld,
    dp_arbitrage_oracle,
    evaluate,
    read_reports_csv,
    verify_degradation,
    write_reports_csv,
)


def _add_degradation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=4.5e-3, help="exponential cost scale")
    p.add_argument("--beta", type=float, default=1.3, help="exponential cost exponent")


def _add_cost_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[CD_MODE, LD_MODE], default=CD_MODE,
                   help="degradation pricing: cycle-based or linearized")
    p.add_argument("--a-d", type=float, default=None,
                   help="linearized cost coefficient (default: one full reference cycle)")
    p.add_argument("--delta", type=float, default=140.0,
                   help="deviation penalty, currency per MWh")
    p.add_argument("--degradation-scale", type=float, default=1000.0,
                   help="currency multiplier on degradation increments")
    _add_degradation_flags(p)


def _add_profile_flags(p: argparse.ArgumentParser, default_dt: float) -> None:
    p.add_argument("--price", action="append", required=True,
                   help="price CSV (repeat for multiple days)")
    p.add_argument("--fr", action="append", required=True,
                   help="regulation-signal CSV (repeat for multiple days)")
    p.add_argument("--dt", type=float, default=default_dt, help="step length, seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="battrl",
        description="Battery control under cycle-based degradation: "
                    "data, training, evaluation, and verification tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write synthetic day CSVs")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--days", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--price-mean", type=float, default=40.0)
    g.add_argument("--price-amplitude", type=float, default=15.0)
    g.add_argument("--price-ar", type=float, default=0.7)
    g.add_argument("--price-noise", type=float, default=3.0)
    g.add_argument("--fr-noise", type=float, default=0.35)
    g.add_argument("--config", default=None)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a policy on daily profiles")
    _add_profile_flags(t, default_dt=10.0)
    _add_cost_flags(t)
    t.add_argument("--out-dir", required=True)
    t.add_argument("--weights", default=None, help="weights output path")
    t.add_argument("--episodes", type=int, default=2000)
    t.add_argument("--steps", type=int, default=None,
                   help="steps per episode (default: shortest profile)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--gamma", type=float, default=1.0)
    t.add_argument("--learning-rate", type=float, default=0.001)
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--target-interval", type=int, default=500)
    t.add_argument("--epsilon-init", type=float, default=1.0)
    t.add_argument("--epsilon-floor", type=float, default=0.001)
    t.add_argument("--replay-capacity", type=int, default=100_000)
    t.add_argument("--initial-soc", type=float, default=0.5)
    t.add_argument("--config", default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="greedy rollout of trained weights")
    _add_profile_flags(e, default_dt=2.0)
    _add_cost_flags(e)
    e.add_argument("--weights", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--initial-soc", type=float, default=0.5)
    e.add_argument("--seed", type=int, default=0, help="unused; kept for config parity")
    e.add_argument("--config", default=None)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="day-by-day statistics of two report files")
    c.add_argument("--cd", required=True, help="episode_reports.csv of the cycle-based run")
    c.add_argument("--ld", required=True, help="episode_reports.csv of the linearized run")
    c.add_argument("--out-dir", required=True)
    c.add_argument("--config", default=None)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify-degradation",
                       help="fuzz step-wise accounting against the offline decomposition")
    v.add_argument("--walks", type=int, default=1000)
    v.add_argument("--max-len", type=int, default=2000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tolerance", type=float, default=1e-9)
    v.add_argument("--trajectory", default=None,
                   help="check one SoC trajectory CSV instead of fuzzing")
    v.add_argument("--cycles-out", default=None,
                   help="with --trajectory: write its cycle list CSV here")
    _add_degradation_flags(v)
    v.add_argument("--config", default=None)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("dp-oracle", help="optimal arbitrage value by dynamic programming")
    d.add_argument("--price", required=True, help="price CSV")
    d.add_argument("--dt", type=float, default=300.0)
    d.add_argument("--grid", type=int, default=201, help="SoC grid points")
    d.add_argument("--initial-soc", type=float, default=0.5)
    d.add_argument("--config", default=None)
    d.set_defaults(func=cmd_dp_oracle)

    return parser


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Config-file keys override flags of the same name (documented inversion)."""
    if getattr(args, "config", None) is None:
        return
    overrides = parse_config_file(args.config)
    # collect converters from the chosen subparser's actions
    sub_actions = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    chosen = sub_actions.choices[args.command]
    types = {a.dest: (a.type or str) for a in chosen._actions if a.dest != "help"}
    for key, raw in overrides.items():
        dest = key.replace("-", "_")
        if dest not in types:
            raise ValueError(f"unknown config key {key!r} for command {args.command!r}")
        setattr(args, dest, types[dest](raw))


def _cost_params(args) -> CostParams:
    degradation = DegradationParams(alpha=args.alpha, beta=args.beta)
    a_d = args.a_d
    if args.mode == LD_MODE and a_d is None:
        a_d = reference_cycle_coefficient(degradation, 0.1, 1.0)
    return CostParams(
        delta=args.delta,
        degradation=degradation,
        degradation_scale=args.degradation_scale,
        mode=args.mode,
        a_d=a_d,
    )


def _load_profiles(args):
    if len(args.price) != len(args.fr):
        raise ValueError("need as many --fr files as --price files")
    return [
        load_profile(p, f, target_dt=args.dt, profile_id=Path(p).stem)
        for p, f in zip(args.price, args.fr)
    ]


def cmd_gen_data(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for day in range(args.days):
        spec = SyntheticSpec(
            seed=args.seed + day,
            dt_seconds=2.0,
            price_mean=args.price_mean,
            price_amplitude=args.price_amplitude,
            price_ar_coeff=args.price_ar,
            price_noise_scale=args.price_noise,
            fr_noise_scale=args.fr_noise,
        )
        profile = synth_profile(spec)
        write_profile_csvs(
            profile,
            out / f"price_{day:03d}.csv",
            out / f"fr_{day:03d}.csv",
            epoch0=day * 86_400,
        )
    print(f"wrote {args.days} day(s) to {out}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profiles = _load_profiles(args)
    battery = BatteryParams.for_dt(args.dt)
    costs = _cost_params(args)
    steps = args.steps if args.steps is not None else min(len(p) for p in profiles)
    config = TrainConfig(
        gamma=args.gamma,
        learning_rate=args.learning_rate,
        epsilon_init=args.epsilon_init,
        epsilon_floor=args.epsilon_floor,
        batch_size=args.batch_size,
        target_interval=args.target_interval,
        episodes=args.episodes,
        steps_per_episode=steps,
        replay_capacity=args.replay_capacity,
        seed=args.seed,
    )

    def factory(profile):
        return BatteryEnv(profile, battery=battery, costs=costs, initial_soc=args.initial_soc)

    result = train(factory, config, profiles)
    weights_path = Path(args.weights) if args.weights else out / "weights.bqnw"
    save_weights(result.params, weights_path)
    trace_path = out / "train_trace.csv"
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["episode", "profile_id", "total_reward",
             "energy_cost", "fr_penalty", "degradation_cost", "epsilon"]
        )
        for rec in result.records:
            he, hf, hd = rec.env_totals if rec.env_totals else ("", "", "")
            writer.writerow(
                [rec.episode, rec.profile_id, repr(rec.total_reward),
                 repr(he), repr(hf), repr(hd), repr(rec.epsilon_end)]
            )
    print(f"trained {config.episodes} episodes; weights -> {weights_path}, trace -> {trace_path}")
    return 0


def cmd_evaluate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profiles = _load_profiles(args)
    params = load_weights(args.weights)
    sizes = params.layer_sizes()
    if sizes[0] != 6 or sizes[-1] != len(DEFAULT_ACTION_LEVELS):
        raise ValueError(
            f"weights architecture {sizes} does not fit 6 observations "
            f"and {len(DEFAULT_ACTION_LEVELS)} actions"
        )
    battery = BatteryParams.for_dt(args.dt)
    costs = _cost_params(args)
    reports = evaluate(
        params, profiles, battery=battery, costs=costs, initial_soc=args.initial_soc
    )
    write_reports_csv(out / "episode_reports.csv", reports)
    for report in reports:
        trace_path = out / f"soc_trace_{report.profile_id}.csv"
        with open(trace_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "soc"])
            for i, soc in enumerate(report.soc_trace):
                writer.writerow([i, repr(float(soc))])
    print(f"evaluated {len(reports)} day(s); reports -> {out / 'episode_reports.csv'}")
    return 0


def cmd_compare(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats = compare_cd_ld(read_reports_csv(args.cd), read_reports_csv(args.ld))
    path = out / "comparison.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "value"])
        writer.writerow(["mean_diff", repr(stats.mean_diff)])
        writer.writerow(["max_diff", repr(stats.max_diff)])
        writer.writerow(["min_diff", repr(stats.min_diff)])
        writer.writerow(["mean_positive", repr(stats.mean_positive)])
        writer.writerow(["mean_negative", repr(stats.mean_negative)])
        writer.writerow(["fraction_cd_wins", repr(stats.fraction_cd_wins)])
        writer.writerow(["mean_degradation_diff", repr(stats.mean_degradation_diff)])
    print(
        f"mean diff {stats.mean_diff:.4f}, cycle-based wins "
        f"{100 * stats.fraction_cd_wins:.1f}% of days; table -> {path}"
    )
    return 0


def cmd_verify(args) -> int:
    params = DegradationParams(alpha=args.alpha, beta=args.beta)
    if args.trajectory is not None:
        traj = read_soc_csv(args.trajectory)
        result = rainflow_decompose(traj, params)
        core = kernels.TrackerCore(params.alpha, params.beta, float(traj.values[0]))
        engine_total = kernels.advance_many(core, traj.values[1:])
        dev = abs(engine_total - result.total_cost) / max(abs(result.total_cost), 1e-15)
        if args.cycles_out:
            write_cycles_csv(args.cycles_out, result)
            print(f"cycle list -> {args.cycles_out}")
        ok = dev < args.tolerance
        print(
            f"trajectory of {len(traj.values)} samples: engine {engine_total!r}, "
            f"offline {result.total_cost!r}, relative deviation {dev:.3e} "
            f"-> {'PASS' if ok else 'FAIL'}"
        )
        return 0 if ok else 1
    summary = verify_degradation(
        walks=args.walks, max_len=args.max_len, seed=args.seed,
        params=params, tolerance=args.tolerance,
    )
    print(
        f"{summary.walks} walks: max relative deviation {summary.max_rel_deviation:.3e} "
        f"(tolerance {summary.tolerance:.1e}) -> {'PASS' if summary.passed else 'FAIL'}"
    )
    return 0 if summary.passed else 1


def cmd_dp_oracle(args) -> int:
    prices = load_price_series(args.price, args.dt)
    battery = BatteryParams.for_dt(args.dt)
    value = dp_arbitrage_oracle(
        prices, battery, grid_points=args.grid, initial_soc=args.initial_soc
    )
    print(f"optimal arbitrage reward over {prices.size} steps: {value!r}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser)
        return args.func(args)
    except (ValueError, OSError, WeightsFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
