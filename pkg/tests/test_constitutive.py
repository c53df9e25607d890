import numpy as np
import pytest
from scipy.integrate import quad

from nsf2d.constitutive import L_coef, Phi, Phi_prime, TruncationK, kappa, phi_cap
from nsf2d.errors import DomainError, PhiOverflowError

# oracle values computed with adaptive quadrature (scipy.integrate.quad)
PHI_1_EPS01_M2 = 8.499580274468132      # int_0^1 (1+e^(2t))(0.1+e^t) dt
PB_BAND_G4_K2_R25 = 34.80199032738098   # int_0^2.5 4 t^3 K(t) dt, k = 2
PB_BAND_G4_K2_R29 = 40.38274110528572   # same at rho = 2.9


@pytest.fixture
def K():
    return TruncationK(k=10.0, gamma=5.0)


def test_truncation_plateaus(K):
    assert K.K(5.0) == 1.0
    assert K.K(11.5) == 0.0
    assert K.K(10.5) == 0.5  # quintic smoothstep midpoint
    assert K.K_prime(10.5) < 0.0
    assert K.K_prime(5.0) == 0.0 and K.K_prime(12.0) == 0.0


def test_truncation_bounds_and_monotone(K):
    t = np.linspace(0.0, 13.0, 500)
    vals = K.K(t)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
    band = (t > 10.0) & (t < 11.0)
    assert np.all(np.diff(vals[band]) < 0.0)


def test_truncation_c2_matching(K):
    # K' and K'' vanish at both ends of the band
    d = 1e-7
    for edge in (10.0, 11.0):
        assert K.K_prime(edge) == 0.0
        inner = K.K_prime(edge + d) if edge == 10.0 else K.K_prime(edge - d)
        assert abs(inner) < 1e-5


def test_int_K_piecewise(K):
    assert K.int_K(2.0) == 2.0
    assert K.int_K(0.0) == 0.0
    assert K.int_K(12.0) == K.int_K(11.0) == K.int_K_top == 10.5


def test_int_K_band_value():
    K2 = TruncationK(k=2.0, gamma=4.0)
    # analytic: 2 + 1/2 - (u^6 - 3u^5 + 2.5u^4) at u = 1/2
    assert K2.int_K(2.5) == pytest.approx(2.421875, abs=1e-15)


def test_pressure_below_threshold_exact(K):
    assert K.P_b(2.0) == 32.0
    assert K.P(2.0, 3.0) == 38.0
    assert K.P(0.0, 1.0) == 0.0


def test_pressure_plateau(K):
    assert K.P_b(11.0) == K.P_b(15.0) == K.P_b_top


def test_pressure_band_quadrature_oracle():
    K2 = TruncationK(k=2.0, gamma=4.0)
    assert K2.P_b(2.5) == pytest.approx(PB_BAND_G4_K2_R25, rel=1e-12)
    assert K2.P_b(2.9) == pytest.approx(PB_BAND_G4_K2_R29, rel=1e-12)
    # cross-check the frozen values against a live quadrature oracle

    def S(u):
        return ((6 * u - 15) * u + 10) * u ** 3

    def Kfun(t):
        u = np.clip(t - 2.0, 0.0, 1.0)
        return 1.0 - S(u)

    live, _ = quad(lambda t: 4 * t ** 3 * Kfun(t), 0.0, 2.5, limit=200)
    assert live == pytest.approx(PB_BAND_G4_K2_R25, rel=1e-10)


def test_pressure_exact_power_law_below_k(K):
    rho = np.linspace(0.0, 9.9, 57)
    theta = 1.7
    assert np.allclose(K.P(rho, theta), rho ** 5.0 + theta * rho, rtol=0, atol=1e-12)


def test_pressure_monotone(K):
    rho = np.linspace(0.0, 12.0, 600)
    pb = K.P_b(rho)
    assert np.all(np.diff(pb) >= -1e-12)
    strictly = rho[:-1] < 10.99
    assert np.all(np.diff(pb)[strictly] > 0.0)


def test_derivatives_match_finite_differences(K):
    # straddle both edges of the band
    rho = np.concatenate([np.linspace(9.5, 11.5, 41)])
    d = 1e-6
    fd_int = (K.int_K(rho + d) - K.int_K(rho - d)) / (2 * d)
    assert np.max(np.abs(fd_int - K.K(rho))) < 1e-6
    fd_pb = (K.P_b(rho + d) - K.P_b(rho - d)) / (2 * d)
    expected = 5.0 * rho ** 4.0 * K.K(rho)
    assert np.max(np.abs(fd_pb - expected) / np.maximum(np.abs(expected), 1.0)) < 1e-6


def test_domain_errors(K):
    with pytest.raises(DomainError):
        K.K(-0.5)
    with pytest.raises(DomainError):
        K.int_K(np.array([1.0, -2.0]))
    with pytest.raises(DomainError):
        K.P(1.0, 0.0)
    with pytest.raises(DomainError):
        K.P(-1.0, 1.0)


def test_kappa_and_transfer():
    assert kappa(1.0, m=2.0) == 2.0
    assert kappa(3.0, m=2.0) == 10.0
    assert L_coef(4.0, l=1.0) == 5.0
    assert kappa(2.0, m=3.0, a3=0.5) == 4.5
    with pytest.raises(DomainError):
        kappa(0.0, m=2.0)
    with pytest.raises(DomainError):
        L_coef(-1.0, l=1.0)


def test_phi_anchor_values():
    assert Phi(0.0, 0.5, 2.0) == 0.0
    assert Phi_prime(0.0, 0.3, 2.0) == pytest.approx(2.0 * (0.3 + 1.0), abs=1e-15)
    assert Phi(1.0, 0.1, 2.0) == pytest.approx(PHI_1_EPS01_M2, rel=1e-12)
    live, _ = quad(lambda t: (1 + np.exp(2 * t)) * (0.1 + np.exp(t)), 0.0, 1.0)
    assert live == pytest.approx(PHI_1_EPS01_M2, rel=1e-12)


def test_phi_strictly_increasing():
    z = np.linspace(-5.0, 5.0, 101)
    vals = Phi(z, 0.05, 2.5)
    assert np.all(np.diff(vals) > 0.0)
    assert np.all(Phi_prime(z, 0.05, 2.5) > 0.0)


def test_phi_prime_is_derivative():
    z = np.linspace(-2.0, 2.0, 21)
    d = 1e-6
    fd = (Phi(z + d, 0.2, 1.5) - Phi(z - d, 0.2, 1.5)) / (2 * d)
    assert np.max(np.abs(fd - Phi_prime(z, 0.2, 1.5))) < 1e-6


def test_phi_coefficient_matches_theta_form():
    # Phi'(z) equals theta * kappa_eps(theta) with theta = e^z
    z = np.linspace(-3.0, 3.0, 25)
    eps, m = 0.07, 2.5
    theta = np.exp(z)
    theta_form = (1.0 + theta ** m) * (eps + theta) / theta
    assert np.allclose(Phi_prime(z, eps, m) / theta, theta_form, rtol=1e-13)


def test_phi_overflow_cap():
    cap = phi_cap(2.0)
    assert cap == 25.0
    with pytest.raises(PhiOverflowError):
        Phi(cap + 1.0, 0.1, 2.0)
    with pytest.raises(PhiOverflowError):
        Phi_prime(-cap - 1.0, 0.1, 2.0)
    Phi(cap - 1e-9, 0.1, 2.0)  # just inside is fine
