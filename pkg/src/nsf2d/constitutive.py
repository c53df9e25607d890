"""Constitutive functions: density truncation, pressure, conductivity,
boundary transfer, and the Kirchhoff transform of the entropy equation.

Everything here is a pure function of its arguments; `TruncationK` is
immutable and precomputes the plateau values above the cutoff band.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .errors import DomainError, PhiOverflowError


def _as_given(x, arr):
    """Return a float for scalar input, the array otherwise."""
    if np.ndim(x) == 0:
        return float(arr)
    return arr


@dataclass(frozen=True)
class TruncationK:
    """Quintic-smoothstep cutoff at threshold k plus the pressure built on it.

    K(t) = 1 for t <= k, 0 for t >= k+1, strictly decreasing and C^2 on the
    band. P_b uses the exact power law below k, 16-point Gauss quadrature on
    the band, and a cached constant plateau above it.
    """

    k: float
    gamma: float
    a1: float = 1.0
    a2: float = 1.0
    int_K_top: float = field(init=False)
    P_b_top: float = field(init=False)

    def __post_init__(self):
        if self.k <= 0.0:
            raise DomainError("truncation threshold k must be positive")
        if self.gamma <= 1.0:
            raise DomainError("gamma must exceed 1")
        object.__setattr__(self, "int_K_top", self.k + 0.5)
        top = float(kern.pressure_base_eval(np.array(self.k + 1.0), self.k, self.gamma, self.a1))
        object.__setattr__(self, "P_b_top", top)

    def _check_nonneg(self, t, name):
        if np.any(np.asarray(t) < 0.0):
            raise DomainError(f"{name} must be nonnegative")

    def K(self, t):
        self._check_nonneg(t, "t")
        return _as_given(t, kern.truncation_eval(t, self.k))

    def K_prime(self, t):
        self._check_nonneg(t, "t")
        return _as_given(t, kern.truncation_prime_eval(t, self.k))

    def int_K(self, rho):
        """int_0^rho K(t) dt; equals rho below k, constant k+1/2 above k+1."""
        self._check_nonneg(rho, "rho")
        return _as_given(rho, kern.truncation_integral_eval(rho, self.k))

    def P_b(self, rho):
        self._check_nonneg(rho, "rho")
        return _as_given(rho, kern.pressure_base_eval(rho, self.k, self.gamma, self.a1))

    def P(self, rho, theta):
        """Truncated pressure P_b(rho) + a2 * theta * int_K(rho)."""
        self._check_nonneg(rho, "rho")
        if np.any(np.asarray(theta) <= 0.0):
            raise DomainError("theta must be positive")
        pb = kern.pressure_base_eval(rho, self.k, self.gamma, self.a1)
        ik = kern.truncation_integral_eval(rho, self.k)
        out = pb + self.a2 * np.asarray(theta, dtype=np.float64) * ik
        if np.ndim(rho) == 0 and np.ndim(theta) == 0:
            return float(out)
        return out


def kappa(theta, m, a3=1.0):
    """Heat conductivity a3*(1 + theta^m), theta > 0."""
    if np.any(np.asarray(theta) <= 0.0):
        raise DomainError("theta must be positive")
    out = a3 * (1.0 + np.power(np.asarray(theta, dtype=np.float64), m))
    return _as_given(theta, out)


def L_coef(theta, l, a4=1.0):
    """Boundary heat-transfer coefficient a4*(1 + theta^l), theta > 0."""
    if np.any(np.asarray(theta) <= 0.0):
        raise DomainError("theta must be positive")
    out = a4 * (1.0 + np.power(np.asarray(theta, dtype=np.float64), l))
    return _as_given(theta, out)


def phi_cap(m):
    """Overflow cap on |z| for the transform; beyond it the state is junk."""
    return 50.0 / m


def _check_cap(z, m, cap):
    zmax = float(np.max(np.abs(z))) if np.size(z) else 0.0
    c = phi_cap(m) if cap is None else cap
    if not np.all(np.isfinite(np.asarray(z, dtype=np.float64))):
        raise DomainError("z must be finite")
    if zmax > c:
        raise PhiOverflowError(zmax, c)


def Phi(z, epsilon, m, cap=None):
    """Kirchhoff transform int_0^z (1+e^(m tau))(eps+e^tau) d tau.

    Closed form; strictly increasing with Phi(0) = 0. Raises
    PhiOverflowError when |z| exceeds the cap (default 50/m).
    """
    _check_cap(z, m, cap)
    return _as_given(z, kern.phi_eval(z, epsilon, m))


def Phi_prime(z, epsilon, m, cap=None):
    """(1 + e^(m z)) (eps + e^z), the exact derivative of Phi."""
    _check_cap(z, m, cap)
    return _as_given(z, kern.phi_prime_eval(z, epsilon, m))
