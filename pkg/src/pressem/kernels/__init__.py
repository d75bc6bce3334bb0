"""Numeric kernels with a compiled fast path.

At import time the Cython extension is preferred; environments without a
compiler fall back to the numpy/pure-Python reference in `_pyref`. Both
backends implement the same functions with matching semantics; see
benchmarks/bench_kernels.py for a side-by-side timing comparison.
"""

import os

from . import _pyref

if os.environ.get("PRESSEM_BACKEND") == "python":
    _impl = _pyref
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = _pyref

BACKEND = _impl.BACKEND_NAME

moving_average = _impl.moving_average
first_order_lag = _impl.first_order_lag
resample_to_grid = _impl.resample_to_grid
table_lookup = _impl.table_lookup
table_lookup_many = _impl.table_lookup_many
simulate_press_core = _impl.simulate_press_core


def available_backends():
    """Names of importable backends ('python' always; 'native' when compiled)."""
    names = [_pyref.BACKEND_NAME]
    if _impl is not _pyref:
        names.append(_impl.BACKEND_NAME)
    return names


def get_backend(name: str):
    """Return the backend module by name; used by tests and the benchmark."""
    if name == _pyref.BACKEND_NAME:
        return _pyref
    if name == BACKEND:
        return _impl
    raise KeyError(f"backend {name!r} not available")
