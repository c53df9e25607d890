import numpy as np
import pytest

from nsf2d.constitutive import TruncationK
from nsf2d.errors import NonConvergenceError, ShapeError
from nsf2d.grid import Grid, VectorField, integrate
from nsf2d.params import ApproxParams, ModelParams
from nsf2d.subsolvers import (
    SolveOptions,
    State,
    momentum_operator,
    momentum_residual,
    continuity_residual,
    entropy_residual,
    solve_continuity,
    solve_entropy,
    solve_momentum,
)
from nsf2d.verification import (
    mms_continuity_error,
    mms_entropy_error,
    mms_momentum_error,
)


@pytest.fixture
def setup():
    g = Grid(1.0, 1.0, 24, 24)
    mp = ModelParams()
    ap = ApproxParams(epsilon=1e-2, k=10.0, t=1.0, M=mp.M, area=g.area)
    K = TruncationK(k=ap.k, gamma=mp.gamma, a1=mp.a1, a2=mp.a2)
    return g, mp, ap, K


def pinch_velocity(g, amp):
    XU, YU = g.uface_coords()
    XV, YV = g.vface_coords()
    vel = VectorField(-amp * np.sin(np.pi * XU), -amp * np.sin(np.pi * YV))
    vel.u[0, :] = vel.u[-1, :] = 0.0
    vel.v[:, 0] = vel.v[:, -1] = 0.0
    return vel


# -- continuity ---------------------------------------------------------------


def test_continuity_constant_state(setup):
    g, mp, ap, K = setup
    rho, trace = solve_continuity(VectorField.zeros(g), ap, K, g)
    assert trace.converged and trace.iterations == 1
    assert np.max(np.abs(rho - ap.h)) < 1e-12


def test_continuity_mass_identity_and_positivity(setup):
    g, mp, ap, K = setup
    rho, _ = solve_continuity(pinch_velocity(g, 0.4), ap, K, g)
    gap = abs(integrate(g, rho) - ap.h * integrate(g, K.K(rho)))
    assert gap <= 1e-12
    assert integrate(g, rho) <= mp.M + 1e-12
    assert np.min(rho) >= -1e-12
    assert np.max(rho) <= ap.k + 1.0


def test_continuity_truncation_active():
    g = Grid(1.0, 1.0, 32, 32)
    ap = ApproxParams(epsilon=2e-2, k=1.2, t=1.0, M=1.0, area=g.area)
    K = TruncationK(k=1.2, gamma=4.0)
    rho, trace = solve_continuity(pinch_velocity(g, 0.1), ap, K, g, SolveOptions(max_iter=400))
    assert trace.converged
    assert np.max(rho) > ap.k          # truncation band reached
    assert np.max(rho) <= ap.k + 1.0   # but never the ceiling
    gap = abs(integrate(g, rho) - ap.h * integrate(g, K.K(rho)))
    assert gap <= 1e-12
    assert integrate(g, rho) < 1.0     # mass strictly below M once K < 1


def test_continuity_newton_matches_picard():
    g = Grid(1.0, 1.0, 32, 32)
    ap = ApproxParams(epsilon=1e-1, k=1.3, t=1.0, M=1.0, area=g.area)
    K = TruncationK(k=1.3, gamma=4.0)
    vel = pinch_velocity(g, 0.3)
    r1, t1 = solve_continuity(vel, ap, K, g, SolveOptions(max_iter=500, picard_damping=0.5))
    r2, t2 = solve_continuity(vel, ap, K, g, SolveOptions(max_iter=60, continuity_method="newton"))
    assert np.max(np.abs(r1 - r2)) < 1e-8
    assert t2.iterations < t1.iterations


def test_continuity_residual_contract(setup):
    g, mp, ap, K = setup
    vel = pinch_velocity(g, 0.2)
    rho, _ = solve_continuity(vel, ap, K, g)
    res = continuity_residual(rho, vel, ap, K, g)
    assert float(np.sqrt(np.mean(res ** 2))) < 1e-10


def test_continuity_rejects_leaky_velocity(setup):
    g, mp, ap, K = setup
    vel = VectorField.zeros(g)
    vel.u[0, 3] = 1.0
    with pytest.raises(ShapeError):
        solve_continuity(vel, ap, K, g)


def test_continuity_nonconvergence_carries_trace(setup):
    g, mp, ap, K = setup
    ap2 = ApproxParams(epsilon=2e-2, k=1.2, t=1.0, M=1.0, area=g.area)
    K2 = TruncationK(k=1.2, gamma=4.0)
    with pytest.raises(NonConvergenceError) as exc:
        solve_continuity(pinch_velocity(g, 0.1), ap2, K2, g, SolveOptions(max_iter=2))
    assert len(exc.value.trace) == 2


def test_continuity_deterministic(setup):
    g, mp, ap, K = setup
    vel = pinch_velocity(g, 0.3)
    r1, _ = solve_continuity(vel, ap, K, g)
    r2, _ = solve_continuity(vel, ap, K, g)
    assert np.array_equal(r1, r2)


# -- momentum -----------------------------------------------------------------


def test_momentum_homotopy_endpoint_zero(setup):
    g, mp, ap, K = setup
    rho = np.full((g.nx, g.ny), ap.h)
    s = np.zeros((g.nx, g.ny))
    w, _ = solve_momentum(rho, s, VectorField.zeros(g), 0.0, mp, K, g)
    assert np.max(np.abs(w.u)) == 0.0 and np.max(np.abs(w.v)) == 0.0


def test_momentum_rest_state(setup):
    g, mp, ap, K = setup
    rho = np.full((g.nx, g.ny), ap.h)
    s = np.zeros((g.nx, g.ny))
    w, _ = solve_momentum(rho, s, VectorField.zeros(g), 1.0, mp, K, g)
    assert max(np.max(np.abs(w.u)), np.max(np.abs(w.v))) < 1e-13


def test_momentum_operator_symmetric_positive(setup):
    g, mp, ap, K = setup
    op = momentum_operator(g, mp.mu, mp.lam, mp.f)
    assert abs(op.A - op.A.T).max() < 1e-12
    rng = np.random.default_rng(8)
    for _ in range(4):
        x = rng.standard_normal(op.A.shape[0])
        assert x @ (op.A @ x) > 0.0


def test_momentum_residual_contract(setup):
    g, mp, ap, K = setup
    rng = np.random.default_rng(9)
    rho = np.full((g.nx, g.ny), ap.h) * (1.0 + 0.05 * rng.random((g.nx, g.ny)))
    s = 0.1 * rng.standard_normal((g.nx, g.ny))
    vel_old = VectorField.zeros(g)
    vel_old.u[1:-1, :] = 0.01 * rng.standard_normal((g.nx - 1, g.ny))
    vel_old.v[:, 1:-1] = 0.01 * rng.standard_normal((g.nx, g.ny - 1))
    w, _ = solve_momentum(rho, s, vel_old, 0.7, mp, K, g)
    res = momentum_residual(w, rho, s, vel_old, 0.7, mp, K, g)
    assert np.max(np.abs(res)) < 1e-10
    assert w.boundary_normal_max() == 0.0


def test_momentum_deterministic(setup):
    g, mp, ap, K = setup
    rng = np.random.default_rng(10)
    rho = np.full((g.nx, g.ny), ap.h)
    s = 0.05 * rng.standard_normal((g.nx, g.ny))
    w1, _ = solve_momentum(rho, s, VectorField.zeros(g), 1.0, mp, K, g)
    w2, _ = solve_momentum(rho, s, VectorField.zeros(g), 1.0, mp, K, g)
    assert np.array_equal(w1.u, w2.u) and np.array_equal(w1.v, w2.v)


# -- entropy ------------------------------------------------------------------


def test_entropy_homotopy_endpoint(setup):
    g, mp, ap, K = setup
    rho = np.full((g.nx, g.ny), ap.h)
    s0 = 0.3 * np.ones((g.nx, g.ny))
    z, trace = solve_entropy(rho, VectorField.zeros(g), s0, 0.0, mp, ap, K, g)
    assert trace.converged
    assert np.max(np.abs(z)) < 1e-10


def test_entropy_rest_state(setup):
    g, mp, ap, K = setup
    rho = np.full((g.nx, g.ny), ap.h)
    z, trace = solve_entropy(rho, VectorField.zeros(g), np.zeros_like(rho), 1.0, mp, ap, K, g)
    assert trace.converged and trace.iterations == 1
    assert np.max(np.abs(z)) == 0.0


def test_entropy_theta_positive_finite(setup):
    g, mp, ap, K = setup
    rng = np.random.default_rng(12)
    rho = np.full((g.nx, g.ny), ap.h) * (1.0 + 0.1 * rng.random((g.nx, g.ny)))
    vel = pinch_velocity(g, 0.2)
    z, _ = solve_entropy(rho, vel, np.zeros_like(rho), 1.0, mp, ap, K, g)
    theta = np.exp(z)
    assert np.all(np.isfinite(z))
    assert np.all(theta > 0.0)
    res = entropy_residual(z, rho, vel, 1.0, mp, ap, K, g)
    assert float(np.sqrt(np.mean(res ** 2))) < 1e-9


def test_entropy_deterministic(setup):
    g, mp, ap, K = setup
    rho = np.full((g.nx, g.ny), ap.h)
    vel = pinch_velocity(g, 0.15)
    z1, _ = solve_entropy(rho, vel, np.zeros_like(rho), 1.0, mp, ap, K, g)
    z2, _ = solve_entropy(rho, vel, np.zeros_like(rho), 1.0, mp, ap, K, g)
    assert np.array_equal(z1, z2)


# -- manufactured solutions (coarse; the acceptance suite runs the full study) --


def test_mms_orders_coarse():
    e_cont = [mms_continuity_error(n) for n in (16, 32)]
    assert np.log2(e_cont[0] / e_cont[1]) > 0.85
    e_mom = [mms_momentum_error(n) for n in (16, 32)]
    assert np.log2(e_mom[0] / e_mom[1]) > 1.85
    e_ent = [mms_entropy_error(n) for n in (16, 32)]
    assert np.log2(e_ent[0] / e_ent[1]) > 1.85


# -- state carrier ---------------------------------------------------------------


def test_state_roundtrip(tmp_path, setup):
    g, mp, ap, K = setup
    rng = np.random.default_rng(13)
    st = State.rest(g, ap.h)
    st.s += 0.01 * rng.standard_normal(st.s.shape)
    st.vel.u[1:-1, :] = 1e-3 * rng.standard_normal((g.nx - 1, g.ny))
    path = tmp_path / "st.state"
    st.save(path, g)
    g2, back = State.load(path)
    assert np.array_equal(back.rho, st.rho)
    assert np.array_equal(back.vel.u, st.vel.u)
    assert np.array_equal(back.s, st.s)
    assert np.array_equal(back.theta, st.theta)


def test_state_validation(setup):
    g, mp, ap, K = setup
    st = State.rest(g, ap.h)
    st.validate(g)
    st.rho[0, 0] = -1.0
    with pytest.raises(Exception):
        st.validate(g)
