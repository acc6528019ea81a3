"""Evaluation, comparison statistics, and validation oracles.

Greedy policy rollouts produce per-day reports whose degradation totals are
cross-checkable against the offline cycle analysis; comparison statistics
summarize cycle-based vs. linearized runs day by day; the dynamic-programming
oracle bounds achievable arbitrage profit on deterministic price days; and
the equivalence fuzzer hammers the incremental cycle accounting against the
offline decomposition on random walks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from battrl import kernels
from battrl.data import MarketProfile
from battrl.dqn import QNetworkParams, q_forward
from battrl.env import DEFAULT_ACTION_LEVELS, BatteryEnv, BatteryParams, CostParams
from battrl.rainflow import (
    CycleRecord,
    DegradationParams,
    RainflowResult,
    SocTrajectory,
    rainflow_decompose,
)


@dataclass(frozen=True)
class EpisodeReport:
    """One greedy evaluation day, with the realized trajectory's cycle list."""

    profile_id: str
    energy_cost: float
    fr_penalty: float
    degradation_cost: float
    total_reward: float
    cycles: tuple[CycleRecord, ...]
    throughput: float
    mean_soc: float
    soc_trace: np.ndarray


@dataclass(frozen=True)
class ComparisonStats:
    """Day-by-day differences between a cycle-based and a linearized run."""

    reward_diffs: np.ndarray       # per day, cycle-based minus linearized
    mean_diff: float
    max_diff: float
    min_diff: float
    mean_positive: float           # mean over days with diff > 0 (0 if none)
    mean_negative: float           # mean over days with diff < 0 (0 if none)
    fraction_cd_wins: float        # fraction of days with diff >= 0
    degradation_diffs: np.ndarray  # per-day degradation-cost differences
    mean_degradation_diff: float


@dataclass(frozen=True)
class DegradationFactors:
    """Auxiliary stressors: summed depth-of-discharge and time-mean SoC."""

    c_rate_factor: float
    soc_stress: float


@dataclass(frozen=True)
class FuzzSummary:
    """Outcome of the engine-vs-offline-decomposition fuzz run."""

    walks: int
    max_rel_deviation: float
    tolerance: float
    passed: bool


def evaluate(
    params: QNetworkParams,
    profiles: Sequence[MarketProfile],
    battery: BatteryParams | None = None,
    costs: CostParams | None = None,
    action_levels: tuple[float, ...] = DEFAULT_ACTION_LEVELS,
    initial_soc: float = 0.5,
    obs_price_scale: float = 100.0,
) -> list[EpisodeReport]:
    """Greedy (epsilon = 0) rollout of the policy on each profile.

    The report's total reward is computed once as minus the sum of the three
    accumulated cost totals, so the identity holds exactly.
    """
    sizes = params.layer_sizes()
    if sizes[-1] != len(action_levels):
        raise ValueError(
            f"network has {sizes[-1]} outputs but the action set has {len(action_levels)} levels"
        )
    reports = []
    for profile in profiles:
        env = BatteryEnv(
            profile,
            battery=battery,
            costs=costs,
            action_levels=action_levels,
            initial_soc=initial_soc,
            obs_price_scale=obs_price_scale,
        )
        obs = env.reset()
        if sizes[0] != obs.size:
            raise ValueError(
                f"network expects {sizes[0]}-dim observations, environment emits {obs.size}"
            )
        n = env.n_steps
        trace = np.empty(n + 1)
        trace[0] = env.state.soc
        he = hf = hd = 0.0
        for t in range(n):
            action = int(np.argmax(q_forward(params, obs)))
            obs, _, _, bd = env.step(action)
            he += bd.energy_cost
            hf += bd.fr_penalty
            hd += bd.degradation_cost
            trace[t + 1] = env.state.soc
        decomposition = rainflow_decompose(
            SocTrajectory(trace, profile.dt_seconds), env.costs.degradation
        )
        reports.append(
            EpisodeReport(
                profile_id=profile.profile_id,
                energy_cost=he,
                fr_penalty=hf,
                degradation_cost=hd,
                total_reward=-(he + hf + hd),
                cycles=decomposition.cycles,
                throughput=float(np.abs(np.diff(trace)).sum()),
                mean_soc=float(trace.mean()),
                soc_trace=trace,
            )
        )
    return reports


def _subset_mean(diffs: np.ndarray, mask: np.ndarray) -> float:
    return float(diffs[mask].mean()) if mask.any() else 0.0


def compare_cd_ld(
    reports_cd: Sequence[EpisodeReport], reports_ld: Sequence[EpisodeReport]
) -> ComparisonStats:
    """Per-day reward differences (cycle-based minus linearized) and summaries."""
    if len(reports_cd) != len(reports_ld):
        raise ValueError("report lists differ in length")
    for a, b in zip(reports_cd, reports_ld):
        if a.profile_id != b.profile_id:
            raise ValueError(f"misaligned profiles: {a.profile_id!r} vs {b.profile_id!r}")
    diffs = np.array([a.total_reward - b.total_reward for a, b in zip(reports_cd, reports_ld)])
    deg = np.array([a.degradation_cost - b.degradation_cost for a, b in zip(reports_cd, reports_ld)])
    return ComparisonStats(
        reward_diffs=diffs,
        mean_diff=float(diffs.mean()),
        max_diff=float(diffs.max()),
        min_diff=float(diffs.min()),
        mean_positive=_subset_mean(diffs, diffs > 0),
        mean_negative=_subset_mean(diffs, diffs < 0),
        fraction_cd_wins=float((diffs >= 0).mean()),
        degradation_diffs=deg,
        mean_degradation_diff=float(deg.mean()),
    )


def degradation_factors(report: EpisodeReport) -> DegradationFactors:
    """Summed depth-of-discharge (full cycles count twice) and time-mean SoC."""
    dod = 0.0
    for rec in report.cycles:
        dod += 2.0 * rec.depth if rec.kind == "full" else rec.depth
    return DegradationFactors(c_rate_factor=dod, soc_stress=report.mean_soc)


def dp_arbitrage_oracle(
    prices: np.ndarray,
    battery: BatteryParams,
    grid_points: int = 201,
    action_levels: tuple[float, ...] = DEFAULT_ACTION_LEVELS,
    initial_soc: float = 0.5,
) -> float:
    """Optimal arbitrage reward by backward induction on a SoC grid.

    Valid for the no-penalty case (deviation penalty and degradation off);
    values between grid nodes interpolate linearly. The grid spacing must
    resolve a single full-rate step.
    """
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 1 or prices.size == 0:
        raise ValueError("need a non-empty 1-D price series")
    if grid_points < 2:
        raise ValueError("need at least two grid points")
    lo, hi = battery.soc_min, battery.soc_max
    grid = np.linspace(lo, hi, grid_points)
    spacing = (hi - lo) / (grid_points - 1)
    if spacing > battery.rate_fraction_per_step:
        raise ValueError(
            f"grid spacing {spacing:.6g} coarser than the per-step rate "
            f"{battery.rate_fraction_per_step:.6g}; refine the grid"
        )
    energy_mwh = battery.capacity_kwh / 1000.0
    rate = battery.rate_fraction_per_step
    # candidate next-SoC per (action, node), clamped like the environment
    targets = np.clip(grid[None, :] + rate * np.asarray(action_levels)[:, None], lo, hi)
    moves = targets - grid[None, :]
    value = np.zeros_like(grid)
    for t in range(prices.size - 1, -1, -1):
        step_reward = -prices[t] * moves * energy_mwh
        cont = np.interp(targets, grid, value)
        value = (step_reward + cont).max(axis=0)
    return float(np.interp(initial_soc, grid, value))


def verify_degradation(
    walks: int = 1000,
    max_len: int = 2000,
    seed: int = 0,
    params: DegradationParams | None = None,
    soc_min: float = 0.1,
    soc_max: float = 1.0,
    step_scale: float = 0.05,
    tolerance: float = 1e-9,
) -> FuzzSummary:
    """Fuzz the step-wise accounting against the offline decomposition.

    Random bounded SoC walks are costed twice: once through the incremental
    tracker and once by decomposing the whole realized trajectory. The run
    passes when the worst relative deviation is below the tolerance.
    """
    params = params or DegradationParams()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(walks):
        n = int(rng.integers(2, max_len + 1))
        start = float(rng.uniform(soc_min, soc_max))
        steps = rng.uniform(-step_scale, step_scale, n)
        walk = kernels.clamped_walk(start, steps, soc_min, soc_max)
        core = kernels.TrackerCore(params.alpha, params.beta, walk[0])
        engine_total = kernels.advance_many(core, walk[1:])
        oracle_total = kernels.oracle_walk_cost(walk, params.alpha, params.beta)
        denom = max(abs(oracle_total), 1e-15)
        worst = max(worst, abs(engine_total - oracle_total) / denom)
    return FuzzSummary(walks, worst, tolerance, worst < tolerance)


REPORT_COLUMNS = (
    "profile_id",
    "total_reward",
    "energy_cost",
    "fr_penalty",
    "degradation_cost",
    "throughput",
    "mean_soc",
    "full_cycles",
    "half_cycles",
    "c_rate_factor",
    "soc_stress",
)


def write_reports_csv(path: str | Path, reports: Sequence[EpisodeReport]) -> None:
    """Write evaluation reports with their degradation factors, one row per day."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            factors = degradation_factors(r)
            writer.writerow(
                [
                    r.profile_id,
                    repr(r.total_reward),
                    repr(r.energy_cost),
                    repr(r.fr_penalty),
                    repr(r.degradation_cost),
                    repr(r.throughput),
                    repr(r.mean_soc),
                    sum(1 for c in r.cycles if c.kind == "full"),
                    sum(1 for c in r.cycles if c.kind == "half"),
                    repr(factors.c_rate_factor),
                    repr(factors.soc_stress),
                ]
            )


def read_reports_csv(path: str | Path) -> list[EpisodeReport]:
    """Read rows written by :func:`write_reports_csv` back into skeleton reports.

    The cycle list and SoC trace are not persisted; reloaded reports carry the
    scalar totals only (enough for comparison statistics).
    """
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(REPORT_COLUMNS[:7]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            reports.append(
                EpisodeReport(
                    profile_id=row["profile_id"],
                    energy_cost=float(row["energy_cost"]),
                    fr_penalty=float(row["fr_penalty"]),
                    degradation_cost=float(row["degradation_cost"]),
                    total_reward=float(row["total_reward"]),
                    cycles=(),
                    throughput=float(row["throughput"]),
                    mean_soc=float(row["mean_soc"]),
                    soc_trace=np.empty(0),
                )
            )
    return reports
