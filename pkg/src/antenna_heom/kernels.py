"""Selection of the hierarchy right-hand-side backend.

The compiled kernel is used when importable; ``ANTENNA_HEOM_BACKEND``
(``auto``, ``cython`` or ``python``) overrides the choice and
``ANTENNA_HEOM_THREADS`` sets the OpenMP thread count of the compiled path.
"""
import os

from ._ext import numpy_rhs

try:
    from ._ext import _rhs as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("cython", "python")


def available_backends():
    return BACKENDS if _compiled is not None else ("python",)


def default_threads():
    return max(1, int(os.environ.get("ANTENNA_HEOM_THREADS", "1")))


def resolve_backend(name=None):
    name = (name or os.environ.get("ANTENNA_HEOM_BACKEND", "auto")).lower()
    if name == "auto":
        return "cython" if _compiled is not None else "python"
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from auto, {', '.join(BACKENDS)}")
    if name == "cython" and _compiled is None:
        raise ImportError("compiled kernel is not built; reinstall with Cython available")
    return name


def get_kernel(name=None, threads=None):
    """Return ``(backend_name, f)`` where ``f`` has the numpy_rhs signature."""
    name = resolve_backend(name)
    if name == "python":
        return name, numpy_rhs.hierarchy_rhs
    threads = threads or default_threads()

    def compiled(y, dy, h_rows, h_cols, h_vals, s, drift, plus, minus, cup, a, b, fold):
        return _compiled.hierarchy_rhs(y, dy, h_rows, h_cols, h_vals, s, drift,
                                       plus, minus, cup, a, b, fold, threads)

    return name, compiled
