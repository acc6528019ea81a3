# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core: incremental cycle costing and rainflow scans.

Line-for-line mirror of ``_pykernels`` (same operations in the same order,
both backed by libm ``exp``), so results are bit-identical across backends.
"""

from libc.math cimport exp
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memmove

import numpy as np


cdef class TrackerCore:
    """Stack machine turning per-step SoC moves into exact cycle-cost increments.

    See the pure-Python twin for the algorithm description.
    """

    cdef public double alpha
    cdef public double beta
    cdef public int sp_cap
    cdef public double current
    cdef public double accumulated
    cdef double* _stk
    cdef Py_ssize_t _n
    cdef Py_ssize_t _cap

    def __cinit__(self, double alpha, double beta, double initial_soc, int sp_cap=0):
        self._cap = 64
        self._stk = <double*> malloc(self._cap * sizeof(double))
        if self._stk == NULL:
            raise MemoryError()
        self.alpha = alpha
        self.beta = beta
        self.sp_cap = sp_cap
        self.current = initial_soc
        self.accumulated = 0.0
        self._stk[0] = initial_soc
        self._n = 1

    def __dealloc__(self):
        if self._stk != NULL:
            free(self._stk)

    cdef void _grow(self):
        self._cap *= 2
        cdef double* p = <double*> realloc(self._stk, self._cap * sizeof(double))
        if p == NULL:
            raise MemoryError()
        self._stk = p

    def reset(self, double initial_soc):
        self.current = initial_soc
        self.accumulated = 0.0
        self._stk[0] = initial_soc
        self._n = 1

    cpdef double advance(self, double target):
        """Move the SoC to ``target`` and return the cost increment."""
        cdef double c = self.current
        if target == c:
            return 0.0
        cdef double alpha = self.alpha
        cdef double beta = self.beta
        cdef double* stk = self._stk
        cdef Py_ssize_t n = self._n
        cdef double top = stk[n - 1]
        cdef double base, inc, level, enclosing, excursion
        if (target > c and c < top) or (target < c and c > top):
            if n == self._cap:
                self._grow()
                stk = self._stk
            stk[n] = c
            n += 1
            if self.sp_cap and n > <Py_ssize_t> self.sp_cap:
                memmove(stk, stk + 1, (n - 1) * sizeof(double))
                n -= 1
            top = c
        base = c - top
        if base < 0.0:
            base = -base
        inc = 0.0
        while n >= 2:
            level = stk[n - 2]
            enclosing = level - top
            if enclosing < 0.0:
                enclosing = -enclosing
            excursion = target - top
            if excursion < 0.0:
                excursion = -excursion
            if excursion < enclosing:
                break
            inc += alpha * (exp(beta * enclosing) - exp(beta * base))
            if n >= 3:
                n -= 2
                top = stk[n - 1]
                base = level - top
                if base < 0.0:
                    base = -base
            else:
                memmove(stk, stk + 1, (n - 1) * sizeof(double))
                n -= 1
                base = enclosing
                break
        excursion = target - top
        if excursion < 0.0:
            excursion = -excursion
        inc += alpha * (exp(beta * excursion) - exp(beta * base))
        self._n = n
        self.current = target
        self.accumulated += inc
        return inc

    cpdef double step(self, double b):
        return self.advance(self.current + b)

    def sps(self):
        """Last three switching points (oldest, middle, top), left-padded."""
        cdef double* stk = self._stk
        cdef Py_ssize_t n = self._n
        if n >= 3:
            return (stk[n - 3], stk[n - 2], stk[n - 1])
        if n == 2:
            return (stk[0], stk[0], stk[1])
        return (stk[0], stk[0], stk[0])

    def stack_values(self):
        cdef Py_ssize_t i
        return [self._stk[i] for i in range(self._n)]


def advance_many(TrackerCore core, double[::1] targets):
    """Advance ``core`` through every target in order; return the summed cost."""
    cdef double total = 0.0
    cdef Py_ssize_t i, n = targets.shape[0]
    for i in range(n):
        total += core.advance(targets[i])
    return total


def turning_points(double[::1] values):
    """Indices of local extrema, first and last samples included."""
    cdef Py_ssize_t n = values.shape[0]
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] ov = out
    cdef Py_ssize_t m = 1
    cdef Py_ssize_t cur = 0
    cdef int direction = 0, s
    cdef double d
    cdef Py_ssize_t i
    ov[0] = 0
    for i in range(1, n):
        d = values[i] - values[cur]
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
                ov[m] = cur
                m += 1
            direction = s
            cur = i
    if direction != 0:
        ov[m] = cur
        m += 1
    return out[:m].copy()


def decompose_tps(double[::1] tp_values, Py_ssize_t[::1] tp_indices):
    """Rainflow-decompose a turning-point sequence.

    Returns ``(fulls, halves)`` as lists of ``(depth, start_index, end_index)``.
    """
    cdef Py_ssize_t n = tp_values.shape[0]
    cdef double* sv = <double*> malloc(n * sizeof(double) if n else sizeof(double))
    cdef Py_ssize_t* si = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t) if n else sizeof(Py_ssize_t))
    if sv == NULL or si == NULL:
        if sv != NULL:
            free(sv)
        if si != NULL:
            free(si)
        raise MemoryError()
    cdef Py_ssize_t m = 0, k
    cdef double z, d_in, d_left, d_right, d
    fulls = []
    halves = []
    try:
        for k in range(n):
            z = tp_values[k]
            while m >= 3:
                d_in = sv[m - 1] - sv[m - 2]
                if d_in < 0.0:
                    d_in = -d_in
                d_left = sv[m - 2] - sv[m - 3]
                if d_left < 0.0:
                    d_left = -d_left
                d_right = z - sv[m - 1]
                if d_right < 0.0:
                    d_right = -d_right
                if d_in <= d_left and d_in <= d_right:
                    fulls.append((d_in, si[m - 2], si[m - 1]))
                    m -= 2
                else:
                    break
            sv[m] = z
            si[m] = tp_indices[k]
            m += 1
        for k in range(m - 1):
            d = sv[k + 1] - sv[k]
            if d < 0.0:
                d = -d
            halves.append((d, si[k], si[k + 1]))
    finally:
        free(sv)
        free(si)
    return fulls, halves


def oracle_walk_cost(double[::1] values, double alpha, double beta):
    """Offline half-stroke cost of a whole trajectory, fused for speed."""
    cdef Py_ssize_t n = values.shape[0]
    cdef double* tps = <double*> malloc(n * sizeof(double) if n else sizeof(double))
    if tps == NULL:
        raise MemoryError()
    cdef Py_ssize_t m = 1, i, sn = 0
    cdef int direction = 0, s
    cdef double d, cur, z, d_in, d_left, d_right
    cdef double base = alpha
    cdef double total = 0.0
    cdef double* sv
    tps[0] = values[0]
    cur = values[0]
    try:
        for i in range(1, n):
            d = values[i] - cur
            if d == 0.0:
                continue
            if d > 0.0:
                s = 1
            else:
                s = -1
            if s != direction:
                if direction != 0:
                    tps[m] = cur
                    m += 1
                direction = s
            cur = values[i]
        if direction != 0:
            tps[m] = cur
            m += 1
        sv = <double*> malloc(m * sizeof(double))
        if sv == NULL:
            raise MemoryError()
        try:
            for i in range(m):
                z = tps[i]
                while sn >= 3:
                    d_in = sv[sn - 1] - sv[sn - 2]
                    if d_in < 0.0:
                        d_in = -d_in
                    d_left = sv[sn - 2] - sv[sn - 3]
                    if d_left < 0.0:
                        d_left = -d_left
                    d_right = z - sv[sn - 1]
                    if d_right < 0.0:
                        d_right = -d_right
                    if d_in <= d_left and d_in <= d_right:
                        total += 2.0 * (alpha * exp(beta * d_in) - base)
                        sn -= 2
                    else:
                        break
                sv[sn] = z
                sn += 1
            for i in range(sn - 1):
                d = sv[i + 1] - sv[i]
                if d < 0.0:
                    d = -d
                total += alpha * exp(beta * d) - base
        finally:
            free(sv)
    finally:
        free(tps)
    return total


def clamped_walk(double c0, double[::1] raw_steps, double lo, double hi):
    """Cumulative trajectory from ``c0`` with per-step clamping to [lo, hi]."""
    cdef Py_ssize_t n = raw_steps.shape[0]
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double c = c0
    cdef Py_ssize_t i
    ov[0] = c
    for i in range(n):
        c = c + raw_steps[i]
        if c > hi:
            c = hi
        elif c < lo:
            c = lo
        ov[i + 1] = c
    return out
