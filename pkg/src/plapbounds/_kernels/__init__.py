"""Hot-kernel backend selection.

The numeric inner loops (p-energy and its gradient, distance transforms,
lattice ball scans) exist twice: as numba @njit kernels and as
vectorized numpy/scipy fallbacks. The active backend is fixed at import
time by the ``PLAPBOUNDS_BACKEND`` environment variable:

* ``numba`` (default when numba imports cleanly)
* ``numpy``

``benchmarks/bench_kernels.py`` times the two implementations against
each other; the test suite checks they agree.
"""

import os
import warnings

from . import numpy_impl

_requested = os.environ.get("PLAPBOUNDS_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    warnings.warn(
        f"PLAPBOUNDS_BACKEND={_requested!r} not recognized; using numpy fallback",
        stacklevel=1,
    )
    _requested = "numpy"

_impl = None
if _requested in ("", "numba"):
    try:
        from . import numba_impl as _numba_impl

        _impl = _numba_impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            warnings.warn("numba requested but not importable; using numpy fallback")
        _impl = None
if _impl is None:
    _impl = numpy_impl
    BACKEND = "numpy"

p_quotient_parts_2d = _impl.p_quotient_parts_2d
p_quotient_vals_2d = _impl.p_quotient_vals_2d
pseudo_energy_2d = _impl.pseudo_energy_2d
p_quotient_parts_1d = _impl.p_quotient_parts_1d
p_quotient_vals_1d = _impl.p_quotient_vals_1d
pseudo_energy_1d = _impl.pseudo_energy_1d
edt = _impl.edt
count_within = _impl.count_within
ball_sums = _impl.ball_sums


def backend_name():
    return BACKEND
