"""Kernel backend selection: compiled extension if built, numpy fallback.

Set NSF2D_KERNELS=pure or NSF2D_KERNELS=compiled to force a lane; the
default prefers the compiled extension and silently falls back.
"""

import os

import numpy as np

from . import pure as _pure

_choice = os.environ.get("NSF2D_KERNELS", "").strip().lower()
if _choice not in ("", "pure", "compiled"):
    raise RuntimeError(f"NSF2D_KERNELS must be 'pure' or 'compiled', got {_choice!r}")

if _choice == "pure":
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _pure

BACKEND = _impl.BACKEND


def _arr(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def truncation_eval(t, k):
    return _impl.truncation_eval(_arr(t), float(k))


def truncation_prime_eval(t, k):
    return _impl.truncation_prime_eval(_arr(t), float(k))


def truncation_integral_eval(rho, k):
    return _impl.truncation_integral_eval(_arr(rho), float(k))


def pressure_base_eval(rho, k, gamma, a1=1.0):
    return _impl.pressure_base_eval(_arr(rho), float(k), float(gamma), float(a1))


def phi_eval(z, eps, m):
    return _impl.phi_eval(_arr(z), float(eps), float(m))


def phi_prime_eval(z, eps, m):
    return _impl.phi_prime_eval(_arr(z), float(eps), float(m))


def upwind_div(u, v, c, hx, hy):
    return _impl.upwind_div(_arr(u), _arr(v), _arr(c), float(hx), float(hy))


def upwind_matrix(u, v, kfac, hx, hy):
    return _impl.upwind_matrix(_arr(u), _arr(v), _arr(kfac), float(hx), float(hy))
