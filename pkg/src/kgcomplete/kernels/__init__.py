"""Hot numeric kernels with selectable backend.

The numba backend is used when available; set ``KGC_NO_NUMBA=1`` to force
the pure-numpy fallback. ``BACKEND`` records the active choice.
"""

import os

from . import numpy_impl

_NAMES = [
    "transe_scores", "distmult_scores", "complex_scores", "rotate_scores",
    "transe_grads", "distmult_grads", "complex_grads", "rotate_grads",
    "l3_penalty", "l3_add_grad", "adam_update", "levenshtein", "split_scan",
]

__all__ = _NAMES + ["BACKEND", "available_backends", "get_backend"]


def _want_numba():
    flag = os.environ.get("KGC_NO_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


if _want_numba():
    from . import numba_impl as _impl
    BACKEND = "numba"
else:
    _impl = numpy_impl
    BACKEND = "numpy"

for _n in _NAMES:
    globals()[_n] = getattr(_impl, _n)


def get_backend(name):
    """Fetch a backend module by name ('numpy' or 'numba'), for benchmarks
    and cross-backend agreement tests."""
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        from . import numba_impl
        return numba_impl
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["numpy"]
    try:
        import numba  # noqa: F401
        names.append("numba")
    except ImportError:
        pass
    return names
