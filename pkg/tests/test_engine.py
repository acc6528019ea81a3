import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from battrl.engine import CycleTracker
from battrl.rainflow import (
    DegradationParams,
    SocTrajectory,
    cycle_cost,
    rainflow_decompose,
)

PARAMS = DegradationParams()


def phi(d):
    return cycle_cost(d, PARAMS)


def walk(tracker, moves):
    return [tracker.step(b) for b in moves]


class TestConstruction:
    def test_initial_state(self):
        t = CycleTracker(PARAMS, initial_soc=0.3)
        assert t.sp_stack == (0.3,)
        assert t.current_soc == 0.3
        assert t.accumulated_cost == 0.0
        assert t.observe_sps() == (0.3, 0.3, 0.3)

    @pytest.mark.parametrize("soc", [-0.1, 1.5])
    def test_rejects_bad_soc(self, soc):
        with pytest.raises(ValueError):
            CycleTracker(PARAMS, initial_soc=soc)

    def test_rejects_bad_cap(self):
        with pytest.raises(ValueError):
            CycleTracker(PARAMS, initial_soc=0.5, sp_cap=0)


class TestStep:
    def test_reference_walk_increments(self):
        """Charge, small dip, deep charge: the dip settles as a full cycle mid-stroke."""
        t = CycleTracker(PARAMS, initial_soc=0.2)
        inc = walk(t, [0.3, -0.1, 0.5])
        assert inc[0] == pytest.approx(2.1464136e-3, abs=1e-9)
        assert inc[1] == pytest.approx(6.2472772e-4, abs=1e-9)
        assert inc[2] == pytest.approx(5.1577656e-3, abs=1e-9)
        assert sum(inc) == pytest.approx(7.9289069e-3, abs=1e-7)
        assert t.accumulated_cost == pytest.approx(sum(inc), rel=1e-15)
        # the dip's two switching points were consumed by the closed cycle
        assert t.sp_stack == (0.2,)
        assert t.current_soc == pytest.approx(0.9)

    def test_mid_stroke_increment(self):
        t = CycleTracker(PARAMS, initial_soc=0.2)
        t.step(0.2)
        inc = t.step(0.1)
        assert inc == pytest.approx(8.1022818e-4, abs=1e-9)

    def test_zero_move_is_noop(self):
        t = CycleTracker(PARAMS, initial_soc=0.4)
        t.step(0.2)
        stack = t.sp_stack
        cost = t.accumulated_cost
        assert t.step(0.0) == 0.0
        assert t.sp_stack == stack
        assert t.accumulated_cost == cost

    def test_reversal_pushes_switching_point(self):
        t = CycleTracker(PARAMS, initial_soc=0.2)
        t.step(0.3)
        assert t.sp_stack == (0.2,)
        t.step(-0.1)
        assert t.sp_stack == (0.2, 0.5)

    def test_residual_drop_keeps_cost_continuous(self):
        """A stroke outgrowing the oldest range drops it without double charging."""
        t = CycleTracker(PARAMS, initial_soc=0.5)
        t.step(-0.2)  # down to 0.3
        inc = t.step(0.5)  # up through 0.5 to 0.8
        assert t.sp_stack == (0.3,)
        assert inc == pytest.approx(phi(0.5) - phi(0.0), rel=1e-12)
        assert t.accumulated_cost == pytest.approx(phi(0.2) + phi(0.5) - 2 * phi(0.0), rel=1e-12)

    def test_exact_touch_closes_cycle(self):
        """Returning exactly to the enclosing level settles the inner cycle."""
        t = CycleTracker(PARAMS, initial_soc=0.2)
        walk(t, [0.3, -0.1, 0.1])  # 0.2 -> 0.5 -> 0.4 -> 0.5
        assert t.sp_stack == (0.2,)
        assert t.current_soc == pytest.approx(0.5)
        assert t.accumulated_cost == pytest.approx(
            phi(0.3) + 2 * phi(0.1) - 3 * phi(0.0), rel=1e-12
        )

    def test_nested_cycles_settle_inside_one_step(self):
        t = CycleTracker(PARAMS, initial_soc=0.1)
        for target in [0.9, 0.2, 0.8, 0.3]:  # build nest [0.1, 0.9, 0.2, 0.8]
            t.advance_to(target)
        assert t.sp_stack == (0.1, 0.9, 0.2, 0.8)
        t.advance_to(0.95)  # sweep up: closes (0.8, 0.3) then (0.9, 0.2)
        assert t.sp_stack == (0.1,)
        final = rainflow_decompose(
            SocTrajectory(np.array([0.1, 0.9, 0.2, 0.8, 0.3, 0.95])), PARAMS
        )
        assert t.accumulated_cost == pytest.approx(final.total_cost, rel=1e-12)


class TestObserveSps:
    def test_left_padding(self):
        t = CycleTracker(PARAMS, initial_soc=0.2)
        t.step(0.3)
        assert t.observe_sps() == (0.2, 0.2, 0.2)
        t.step(-0.1)
        assert t.observe_sps() == (0.2, 0.2, 0.5)
        t.step(0.05)
        assert t.observe_sps() == (0.2, 0.5, 0.4)

    def test_reset(self):
        t = CycleTracker(PARAMS, initial_soc=0.2)
        walk(t, [0.3, -0.1, 0.05])
        t.reset(0.7)
        assert t.sp_stack == (0.7,)
        assert t.current_soc == 0.7
        assert t.accumulated_cost == 0.0


class TestCappedStack:
    def test_matches_unbounded_while_shallow(self):
        capped = CycleTracker(PARAMS, initial_soc=0.2, sp_cap=3)
        free = CycleTracker(PARAMS, initial_soc=0.2)
        for b in [0.3, -0.1, 0.5, -0.3, 0.2]:
            assert capped.step(b) == free.step(b)
            assert capped.observe_sps() == free.observe_sps()

    def test_cap_is_enforced(self):
        t = CycleTracker(PARAMS, initial_soc=0.1, sp_cap=3)
        walk(t, [0.8, -0.7, 0.6, -0.5, 0.4])  # nesting depth 5 if unbounded
        assert len(t.sp_stack) <= 3


walk_strategy = st.lists(
    st.floats(-0.12, 0.12, allow_nan=False, allow_infinity=False), min_size=1, max_size=250
)


class TestInvariants:
    @given(walk_strategy, st.floats(0.1, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_increments_nonnegative_and_stack_nests(self, moves, c0):
        t = CycleTracker(PARAMS, initial_soc=c0)
        soc = c0
        for b in moves:
            target = min(max(soc + b, 0.0), 1.0)
            assert t.advance_to(target) >= 0.0
            soc = target
            stack = t.sp_stack
            ranges = [abs(stack[i] - stack[i + 1]) for i in range(len(stack) - 1)]
            for wide, narrow in zip(ranges, ranges[1:]):
                assert wide > narrow
            if len(stack) >= 2:
                assert abs(soc - stack[-1]) < abs(stack[-2] - stack[-1])

    @given(walk_strategy, st.floats(0.1, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_total_matches_offline_decomposition(self, moves, c0):
        t = CycleTracker(PARAMS, initial_soc=c0)
        soc = [c0]
        for b in moves:
            target = min(max(soc[-1] + b, 0.0), 1.0)
            t.advance_to(target)
            soc.append(target)
        offline = rainflow_decompose(SocTrajectory(np.asarray(soc)), PARAMS)
        assert t.accumulated_cost == pytest.approx(offline.total_cost, rel=1e-9, abs=1e-15)

    @given(walk_strategy)
    @settings(max_examples=50, deadline=None)
    def test_alpha_doubling_doubles_increments(self, moves):
        base = CycleTracker(DegradationParams(alpha=4.5e-3), initial_soc=0.5)
        double = CycleTracker(DegradationParams(alpha=9.0e-3), initial_soc=0.5)
        soc = 0.5
        for b in moves:
            target = min(max(soc + b, 0.0), 1.0)
            assert double.advance_to(target) == 2.0 * base.advance_to(target)
            soc = target
