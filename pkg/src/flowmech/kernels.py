"""Kernel dispatch: the compiled extension when importable, NumPy otherwise."""

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"
_active = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Switch the process-wide kernel backend; returns the previous name."""
    global BACKEND, _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    previous, BACKEND, _active = BACKEND, name, _BACKENDS[name]
    return previous


def deviation_values(grid, tau_own, mu, others_load, target, slope, d0_max, weight):
    return _active.deviation_values(grid, tau_own, mu, others_load, target, slope, d0_max, weight)


def misreport_matrix(tau, mu, own_rate, load, weight):
    return _active.misreport_matrix(tau, mu, own_rate, load, weight)
