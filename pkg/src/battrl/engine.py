"""Online per-step degradation cost tracking.

``CycleTracker`` charges every SoC move its exact marginal cycle cost, so the
running total over an episode equals the offline rainflow cost of the realized
trajectory (see ``battrl.rainflow``) without waiting for cycles to complete.
The increments are therefore usable as per-step rewards.
"""

from __future__ import annotations

from battrl import kernels
from battrl.rainflow import DegradationParams


class CycleTracker:
    """Incremental rainflow cycle costing over a streamed SoC trajectory.

    The tracker keeps a stack of switching points (SoC levels where the
    direction of travel reversed, oldest first). Each ``step`` charges the
    exponential depth cost accrued by the move; when a stroke grows past the
    range of the stroke before it, the enclosed full cycle is settled and
    removed eagerly, mid-step, by splitting the increment at the crossing
    level. Increments are never negative.

    With ``sp_cap`` set, the stack is truncated to that many entries (oldest
    dropped on overflow). Capped tracking is an ablation: it matches the
    unbounded tracker only while the nesting depth stays within the cap.
    """

    __slots__ = ("params", "_core")

    def __init__(
        self,
        params: DegradationParams | None = None,
        initial_soc: float = 0.5,
        sp_cap: int | None = None,
    ):
        self.params = params if params is not None else DegradationParams()
        _validate_soc(initial_soc)
        if sp_cap is not None and sp_cap < 1:
            raise ValueError("sp_cap must be at least 1")
        self._core = kernels.TrackerCore(
            self.params.alpha, self.params.beta, initial_soc, sp_cap or 0
        )

    def reset(self, initial_soc: float) -> None:
        """Forget all history and restart from the given SoC."""
        _validate_soc(initial_soc)
        self._core.reset(initial_soc)

    def step(self, b: float) -> float:
        """Apply a signed SoC move and return the degradation-cost increment.

        The caller guarantees the resulting SoC stays in [0, 1]; a zero move
        returns exactly 0.0 and changes nothing.
        """
        return self._core.step(b)

    def advance_to(self, target: float) -> float:
        """Like ``step`` but with an absolute target SoC (no re-rounding)."""
        return self._core.advance(target)

    def observe_sps(self) -> tuple[float, float, float]:
        """Last three switching points, oldest first, left-padded when shallow."""
        return self._core.sps()

    @property
    def sp_stack(self) -> tuple[float, ...]:
        return tuple(self._core.stack_values())

    @property
    def current_soc(self) -> float:
        return self._core.current

    @property
    def accumulated_cost(self) -> float:
        return self._core.accumulated


def _validate_soc(value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"SoC must lie in [0, 1], got {value}")
