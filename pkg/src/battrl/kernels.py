"""Kernel backend selection.

The compiled core (``_cykernels``) is preferred when its extension module was
built; otherwise the pure-Python twin is used. Set ``BATTRL_PURE=1`` in the
environment to force the pure backend (useful for testing the fallback).
Both backends produce bit-identical results.
"""

import os

if os.environ.get("BATTRL_PURE"):
    from battrl import _pykernels as _impl

    COMPILED = False
else:
    try:
        from battrl import _cykernels as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        from battrl import _pykernels as _impl  # type: ignore[no-redef]

        COMPILED = False

TrackerCore = _impl.TrackerCore
advance_many = _impl.advance_many
turning_points = _impl.turning_points
decompose_tps = _impl.decompose_tps
oracle_walk_cost = _impl.oracle_walk_cost
clamped_walk = _impl.clamped_walk


def backend_name() -> str:
    return "compiled" if COMPILED else "pure"
