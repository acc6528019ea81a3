"""Pure-Python kernel core: incremental cycle costing and rainflow scans.

This module mirrors ``_cykernels.pyx`` operation for operation so both
backends produce bit-identical results. Inputs to the array functions are
1-D float64 numpy arrays; outputs are plain Python structures. No argument
validation happens here (callers own the contracts).
"""

from math import exp

import numpy as np


class TrackerCore:
    """Stack machine turning per-step SoC moves into exact cycle-cost increments.

    The stack holds switching points (oldest first); the top entry is the start
    of the stroke in progress. Whenever the stroke's excursion reaches the
    range of the enclosing stroke, the increment is split at the crossing
    level: the enclosed full cycle is popped (or, when only the oldest entry
    remains above, that residual entry is dropped) and accumulation continues
    against the next switching point down, so the running total telescopes to
    the offline rainflow cost of the realized trajectory.
    """

    __slots__ = ("alpha", "beta", "sp_cap", "current", "accumulated", "_stack")

    def __init__(self, alpha, beta, initial_soc, sp_cap=0):
        self.alpha = alpha
        self.beta = beta
        self.sp_cap = sp_cap  # 0 means unbounded
        self.current = initial_soc
        self.accumulated = 0.0
        self._stack = [initial_soc]

    def reset(self, initial_soc):
        self.current = initial_soc
        self.accumulated = 0.0
        self._stack = [initial_soc]

    def advance(self, target):
        """Move the SoC to ``target`` and return the cost increment."""
        c = self.current
        if target == c:
            return 0.0
        stk = self._stack
        alpha = self.alpha
        beta = self.beta
        top = stk[-1]
        # A move away from the side the current excursion is on starts a new
        # switching point; ties (b == 0 or c == top) do not.
        if (target > c and c < top) or (target < c and c > top):
            stk.append(c)
            if self.sp_cap and len(stk) > self.sp_cap:
                del stk[0]
            top = c
        base = c - top
        if base < 0.0:
            base = -base
        inc = 0.0
        while len(stk) >= 2:
            level = stk[-2]
            enclosing = level - top
            if enclosing < 0.0:
                enclosing = -enclosing
            excursion = target - top
            if excursion < 0.0:
                excursion = -excursion
            if excursion < enclosing:
                break
            inc += alpha * (exp(beta * enclosing) - exp(beta * base))
            if len(stk) >= 3:
                # Full cycle (level, top) closed; resume against the next
                # switching point down, from the crossing level.
                del stk[-2:]
                top = stk[-1]
                base = level - top
                if base < 0.0:
                    base = -base
            else:
                # Residual: the stroke outgrew the oldest range. Keep the top
                # as reference so accumulation stays continuous.
                del stk[0]
                base = enclosing
                break
        excursion = target - top
        if excursion < 0.0:
            excursion = -excursion
        inc += alpha * (exp(beta * excursion) - exp(beta * base))
        self.current = target
        self.accumulated += inc
        return inc

    def step(self, b):
        return self.advance(self.current + b)

    def sps(self):
        """Last three switching points (oldest, middle, top), left-padded."""
        stk = self._stack
        n = len(stk)
        if n >= 3:
            return (stk[-3], stk[-2], stk[-1])
        if n == 2:
            return (stk[0], stk[0], stk[1])
        return (stk[0], stk[0], stk[0])

    def stack_values(self):
        return list(self._stack)


def advance_many(core, targets):
    """Advance ``core`` through every target in order; return the summed cost."""
    total = 0.0
    for t in targets.tolist():
        total += core.advance(t)
    return total


def turning_points(values):
    """Indices of local extrema, first and last samples included.

    Plateaus collapse to their first sample; monotone runs keep only their
    endpoints. A constant trajectory yields the single index 0.
    """
    vals = values.tolist()
    n = len(vals)
    out = [0]
    direction = 0
    cur = 0
    for i in range(1, n):
        d = vals[i] - vals[cur]
        if d == 0.0:
            continue
        if d > 0.0:
            s = 1
        else:
            s = -1
        if s == direction:
            cur = i
        else:
            if direction != 0:
                out.append(cur)
            direction = s
            cur = i
    if direction != 0:
        out.append(cur)
    return np.asarray(out, dtype=np.intp)


def decompose_tps(tp_values, tp_indices):
    """Rainflow-decompose a turning-point sequence.

    A range enclosed by its neighbours on both sides is a full cycle and its
    two points leave the residual; leftover strokes are half cycles. Returns
    ``(fulls, halves)`` as lists of ``(depth, start_index, end_index)``.
    """
    vals = tp_values.tolist()
    idxs = tp_indices.tolist()
    sv = []
    si = []
    fulls = []
    for k in range(len(vals)):
        z = vals[k]
        while len(sv) >= 3:
            d_in = sv[-1] - sv[-2]
            if d_in < 0.0:
                d_in = -d_in
            d_left = sv[-2] - sv[-3]
            if d_left < 0.0:
                d_left = -d_left
            d_right = z - sv[-1]
            if d_right < 0.0:
                d_right = -d_right
            if d_in <= d_left and d_in <= d_right:
                fulls.append((d_in, si[-2], si[-1]))
                del sv[-2:]
                del si[-2:]
            else:
                break
        sv.append(z)
        si.append(idxs[k])
    halves = []
    for k in range(len(sv) - 1):
        d = sv[k + 1] - sv[k]
        if d < 0.0:
            d = -d
        halves.append((d, si[k], si[k + 1]))
    return fulls, halves


def oracle_walk_cost(values, alpha, beta):
    """Offline half-stroke cost of a whole trajectory, fused for speed.

    Equals ``sum((phi(depth) - phi(0)) * multiplicity)`` over the rainflow
    decomposition, where full cycles count twice.
    """
    vals = values.tolist()
    n = len(vals)
    tps = [vals[0]]
    direction = 0
    cur = vals[0]
    for i in range(1, n):
        d = vals[i] - cur
        if d == 0.0:
            continue
        if d > 0.0:
            s = 1
        else:
            s = -1
        if s != direction:
            if direction != 0:
                tps.append(cur)
            direction = s
        cur = vals[i]
    if direction != 0:
        tps.append(cur)
    base = alpha  # phi(0)
    total = 0.0
    sv = []
    for z in tps:
        while len(sv) >= 3:
            d_in = sv[-1] - sv[-2]
            if d_in < 0.0:
                d_in = -d_in
            d_left = sv[-2] - sv[-3]
            if d_left < 0.0:
                d_left = -d_left
            d_right = z - sv[-1]
            if d_right < 0.0:
                d_right = -d_right
            if d_in <= d_left and d_in <= d_right:
                total += 2.0 * (alpha * exp(beta * d_in) - base)
                del sv[-2:]
            else:
                break
        sv.append(z)
    for k in range(len(sv) - 1):
        d = sv[k + 1] - sv[k]
        if d < 0.0:
            d = -d
        total += alpha * exp(beta * d) - base
    return total


def clamped_walk(c0, raw_steps, lo, hi):
    """Cumulative trajectory from ``c0`` with per-step clamping to [lo, hi]."""
    steps = raw_steps.tolist()
    out = [0.0] * (len(steps) + 1)
    c = c0
    out[0] = c
    for i in range(len(steps)):
        c = c + steps[i]
        if c > hi:
            c = hi
        elif c < lo:
            c = lo
        out[i + 1] = c
    return np.asarray(out, dtype=np.float64)
