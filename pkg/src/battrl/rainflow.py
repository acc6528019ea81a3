"""Offline rainflow cycle decomposition and exponential cycle costing.

This is the reference ("oracle") side of the degradation model: given a whole
SoC trajectory it extracts charge/discharge cycles, prices them with the
exponential depth cost, and derives the linearized throughput coefficient used
by the linear-degradation baseline. The online tracker in ``battrl.engine``
must reproduce ``RainflowResult.total_cost`` exactly, step by step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from battrl import kernels


@dataclass(frozen=True)
class DegradationParams:
    """Exponential cycle-depth cost: ``phi(d) = alpha * exp(beta * d)``."""

    alpha: float = 4.5e-3
    beta: float = 1.3

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")


@dataclass(frozen=True)
class SocTrajectory:
    """SoC samples in [0, 1] at a fixed time step."""

    values: np.ndarray
    dt_seconds: float = 1.0

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("trajectory must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory contains non-finite values")
        lo = float(arr.min())
        hi = float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"SoC values must lie in [0, 1], got range [{lo}, {hi}]")
        if self.dt_seconds <= 0.0:
            raise ValueError("dt_seconds must be positive")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class CycleRecord:
    """One extracted cycle: kind is 'full' or 'half'; indices refer to samples."""

    kind: str
    depth: float
    start_index: int
    end_index: int


@dataclass(frozen=True)
class RainflowResult:
    cycles: tuple[CycleRecord, ...]
    total_cost: float
    throughput: float
    params: DegradationParams = field(default_factory=DegradationParams)


def cycle_cost(depth: float, params: DegradationParams) -> float:
    """Cost of one half stroke to the given depth, ``alpha * exp(beta * depth)``."""
    if not (0.0 <= depth <= 1.0):
        raise ValueError(f"cycle depth must lie in [0, 1], got {depth}")
    return params.alpha * math.exp(params.beta * depth)


def extract_turning_points(traj: SocTrajectory) -> list[tuple[int, float]]:
    """Local extrema of the trajectory as (index, soc) pairs.

    First and last samples are always included; plateaus collapse to their
    first sample; a constant trajectory yields a single point. Consecutive
    returned values strictly alternate in direction.
    """
    idx = kernels.turning_points(traj.values)
    vals = traj.values
    return [(int(i), float(vals[i])) for i in idx]


def rainflow_decompose(traj: SocTrajectory, params: DegradationParams) -> RainflowResult:
    """Decompose a trajectory into cycles and price them.

    Full cycles are inner ranges enclosed by both neighbouring ranges; the
    leftover residual strokes count as half cycles. ``total_cost`` sums
    ``phi(depth) - phi(0)`` per half stroke, a full cycle contributing two
    half strokes, so an empty or constant trajectory costs exactly zero.
    """
    idx = kernels.turning_points(traj.values)
    tp_vals = np.ascontiguousarray(traj.values[idx])
    fulls, halves = kernels.decompose_tps(tp_vals, np.ascontiguousarray(idx))
    records = [CycleRecord("full", d, int(s), int(e)) for d, s, e in fulls]
    records += [CycleRecord("half", d, int(s), int(e)) for d, s, e in halves]
    base = params.alpha
    total = 0.0
    for d, _, _ in fulls:
        total += 2.0 * (params.alpha * math.exp(params.beta * d) - base)
    for d, _, _ in halves:
        total += params.alpha * math.exp(params.beta * d) - base
    throughput = float(np.abs(np.diff(traj.values)).sum())
    return RainflowResult(tuple(records), total, throughput, params)


def linearized_coefficient(traj: SocTrajectory, params: DegradationParams) -> float:
    """Cost-per-unit-throughput linearization of the cycle cost.

    Ratio of the literal cycle costs (no zero-depth offset; full cycles twice)
    to the trajectory's total SoC throughput. Undefined for a trajectory that
    never moves.
    """
    result = rainflow_decompose(traj, params)
    if result.throughput == 0.0:
        raise ValueError("linearized coefficient is undefined for zero-throughput trajectory")
    total = 0.0
    for rec in result.cycles:
        mult = 2.0 if rec.kind == "full" else 1.0
        total += mult * params.alpha * math.exp(params.beta * rec.depth)
    return total / result.throughput


def reference_cycle_coefficient(params: DegradationParams, soc_min: float, soc_max: float) -> float:
    """Linearized coefficient of one full-depth charge/discharge cycle.

    Canonical trajectory for fixing the linear baseline's coefficient: a
    single full cycle spanning the battery's usable SoC window.
    """
    traj = SocTrajectory(np.array([soc_min, soc_max, soc_min]))
    return linearized_coefficient(traj, params)


def read_soc_csv(path: str | Path) -> SocTrajectory:
    """Read a trajectory CSV: one SoC value per line, or ``t,soc`` pairs.

    A single non-numeric first line is tolerated as a header.
    """
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                values.append(float(row[-1]))
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}: line {lineno}: not a number: {row[-1]!r}") from None
    if not values:
        raise ValueError(f"{path}: no SoC samples found")
    return SocTrajectory(np.asarray(values))


def write_cycles_csv(path: str | Path, result: RainflowResult) -> None:
    """Write the cycle list as CSV with columns ``kind,depth,start,end``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "depth", "start", "end"])
        for rec in result.cycles:
            writer.writerow([rec.kind, repr(rec.depth), rec.start_index, rec.end_index])
