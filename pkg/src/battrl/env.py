"""Battery-control MDP: discrete charge levels, clamped SoC dynamics, decomposed rewards.

Each step converts an action index into a (dis)charge amount in SoC-fraction
units, clamps it so the state of charge always stays inside its bounds,
advances the cycle tracker, and returns the reward split into energy cost,
regulation-tracking penalty, and degradation cost. Degradation is priced
either incrementally from the cycle tracker ("cd") or linearly in throughput
("ld").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from battrl.data import MarketProfile
from battrl.engine import CycleTracker
from battrl.rainflow import DegradationParams

#: Normalized charge levels: full-rate discharge through full-rate charge.
DEFAULT_ACTION_LEVELS: tuple[float, ...] = (
    -1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0,
)

#: Max per-step SoC change at full action for the standard step lengths
#: (200 kWh pack; see BatteryParams.for_dt for other steps).
STANDARD_RATE_BY_DT: dict[float, float] = {
    300.0: 0.05,
    10.0: 1.0 / 540.0,
    2.0: 1.0 / 2700.0,
}

CD_MODE = "cd"
LD_MODE = "ld"


@dataclass(frozen=True)
class BatteryParams:
    """Physical battery description in normalized state-of-charge units."""

    capacity_kwh: float = 200.0
    soc_min: float = 0.1
    soc_max: float = 1.0
    rate_fraction_per_step: float = 0.05
    dt_seconds: float = 300.0

    def __post_init__(self) -> None:
        if self.capacity_kwh <= 0.0:
            raise ValueError("capacity_kwh must be positive")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ValueError("need 0 <= soc_min < soc_max <= 1")
        if self.rate_fraction_per_step <= 0.0:
            raise ValueError("rate_fraction_per_step must be positive")
        if self.dt_seconds <= 0.0:
            raise ValueError("dt_seconds must be positive")

    @property
    def implied_power_kw(self) -> float:
        """Power rating implied by the per-step rate fraction."""
        return self.rate_fraction_per_step * 3600.0 * self.capacity_kwh / self.dt_seconds

    @classmethod
    def for_dt(cls, dt_seconds: float, **overrides) -> "BatteryParams":
        """Standard 200 kWh battery at the given step length.

        The three standard step lengths use the pinned rate table; any other
        step derives its rate from a 120 kW rating.
        """
        rate = overrides.pop("rate_fraction_per_step", None)
        if rate is None:
            rate = STANDARD_RATE_BY_DT.get(float(dt_seconds))
        if rate is None:
            capacity = overrides.get("capacity_kwh", 200.0)
            rate = 120.0 * dt_seconds / (3600.0 * capacity)
        return cls(rate_fraction_per_step=rate, dt_seconds=float(dt_seconds), **overrides)


@dataclass(frozen=True)
class CostParams:
    """Reward shaping: deviation penalty, degradation model and pricing mode."""

    delta: float = 140.0
    degradation: DegradationParams = field(default_factory=DegradationParams)
    degradation_scale: float = 1000.0
    mode: str = CD_MODE
    a_d: float | None = None

    def __post_init__(self) -> None:
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.degradation_scale < 0.0:
            raise ValueError("degradation_scale must be nonnegative")
        if self.mode not in (CD_MODE, LD_MODE):
            raise ValueError(f"mode must be '{CD_MODE}' or '{LD_MODE}', got {self.mode!r}")
        if self.mode == LD_MODE:
            if self.a_d is None or self.a_d < 0.0:
                raise ValueError("ld mode needs a nonnegative a_d coefficient")


@dataclass(frozen=True)
class RewardBreakdown:
    """One step's reward split; reward is exactly minus the three costs."""

    energy_cost: float
    fr_penalty: float
    degradation_cost: float
    reward: float


@dataclass(frozen=True)
class EnvState:
    """Read-only snapshot of the environment at step ``t``."""

    t: int
    price: float
    fr: float
    soc: float
    tracker: CycleTracker


def _clamped_target(soc: float, action_level: float, params: BatteryParams) -> float:
    raw = soc + params.rate_fraction_per_step * action_level
    if raw < params.soc_min:
        return params.soc_min
    if raw > params.soc_max:
        return params.soc_max
    return raw


def action_to_power(
    action_index: int,
    soc: float,
    params: BatteryParams,
    action_set: tuple[float, ...] = DEFAULT_ACTION_LEVELS,
) -> float:
    """SoC change for an action, clamped so the new SoC stays in bounds."""
    if not 0 <= action_index < len(action_set):
        raise ValueError(f"action index {action_index} outside 0..{len(action_set) - 1}")
    if not params.soc_min <= soc <= params.soc_max:
        raise ValueError(f"soc {soc} outside [{params.soc_min}, {params.soc_max}]")
    return _clamped_target(soc, action_set[action_index], params) - soc


class BatteryEnv:
    """Sequential single-owner environment over one immutable market profile.

    ``step`` follows the gym convention: ``(next_obs, reward, done, info)``
    where ``info`` is the :class:`RewardBreakdown`. Episodes run exactly
    ``len(profile)`` steps; the terminal observation repeats the final
    exogenous values.
    """

    def __init__(
        self,
        profile: MarketProfile,
        battery: BatteryParams | None = None,
        costs: CostParams | None = None,
        action_levels: tuple[float, ...] = DEFAULT_ACTION_LEVELS,
        initial_soc: float = 0.5,
        obs_price_scale: float = 100.0,
    ):
        self.profile = profile
        self.battery = battery if battery is not None else BatteryParams.for_dt(profile.dt_seconds)
        self.costs = costs if costs is not None else CostParams()
        self.action_levels = tuple(float(a) for a in action_levels)
        if not self.action_levels:
            raise ValueError("need at least one action level")
        if self.battery.dt_seconds != profile.dt_seconds:
            raise ValueError(
                f"battery step {self.battery.dt_seconds} s != profile step {profile.dt_seconds} s"
            )
        if not self.battery.soc_min <= initial_soc <= self.battery.soc_max:
            raise ValueError("initial_soc outside the SoC bounds")
        if obs_price_scale <= 0.0:
            raise ValueError("obs_price_scale must be positive")
        self.initial_soc = float(initial_soc)
        self.obs_price_scale = float(obs_price_scale)
        self._energy_mwh = self.battery.capacity_kwh / 1000.0
        self._tracker = CycleTracker(self.costs.degradation, initial_soc=self.initial_soc)
        self._t = 0
        self._soc = self.initial_soc
        self._he_sum = 0.0
        self._hf_sum = 0.0
        self._hd_sum = 0.0

    @property
    def n_actions(self) -> int:
        return len(self.action_levels)

    @property
    def n_steps(self) -> int:
        return len(self.profile)

    @property
    def state(self) -> EnvState:
        t = min(self._t, self.n_steps - 1)
        return EnvState(
            self._t,
            float(self.profile.prices[t]),
            float(self.profile.fr_signal[t]),
            self._soc,
            self._tracker,
        )

    @property
    def done(self) -> bool:
        return self._t >= self.n_steps

    @property
    def episode_totals(self) -> tuple[float, float, float]:
        """Accumulated (energy cost, deviation penalty, degradation cost)."""
        return (self._he_sum, self._hf_sum, self._hd_sum)

    def reset(self) -> np.ndarray:
        self._t = 0
        self._soc = self.initial_soc
        self._tracker.reset(self.initial_soc)
        self._he_sum = 0.0
        self._hf_sum = 0.0
        self._hd_sum = 0.0
        return self.observe()

    def observe(self) -> np.ndarray:
        """(scaled price, fr, soc, last three switching points oldest-first)."""
        t = min(self._t, self.n_steps - 1)
        sp0, sp1, sp2 = self._tracker.observe_sps()
        return np.array(
            [
                self.profile.prices[t] / self.obs_price_scale,
                self.profile.fr_signal[t],
                self._soc,
                sp0,
                sp1,
                sp2,
            ]
        )

    def step(self, action_index: int) -> tuple[np.ndarray, float, bool, RewardBreakdown]:
        if self.done:
            raise RuntimeError("episode is over; call reset()")
        if not 0 <= action_index < len(self.action_levels):
            raise ValueError(
                f"action index {action_index} outside 0..{len(self.action_levels) - 1}"
            )
        t = self._t
        price = float(self.profile.prices[t])
        fr = float(self.profile.fr_signal[t])
        soc = self._soc
        battery = self.battery
        costs = self.costs

        target = _clamped_target(soc, self.action_levels[action_index], battery)
        b = target - soc
        energy_cost = price * b * self._energy_mwh
        fr_penalty = (
            costs.delta
            * abs(battery.rate_fraction_per_step * fr - b)
            * self._energy_mwh
        )
        increment = self._tracker.advance_to(target)
        if costs.mode == CD_MODE:
            degradation_cost = costs.degradation_scale * increment
        else:
            degradation_cost = costs.a_d * abs(b) * costs.degradation_scale
        reward = -(energy_cost + fr_penalty + degradation_cost)

        self._soc = target
        self._t = t + 1
        self._he_sum += energy_cost
        self._hf_sum += fr_penalty
        self._hd_sum += degradation_cost
        breakdown = RewardBreakdown(energy_cost, fr_penalty, degradation_cost, reward)
        return self.observe(), reward, self.done, breakdown
