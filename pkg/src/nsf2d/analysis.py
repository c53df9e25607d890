"""Diagnostics that re-enact the estimates driving the regularization limit:
Helmholtz splitting, effective viscous flux, integrated energy/entropy
balance residuals, the uniform-bound norm panel, the density overshoot
measure, and the epsilon/k sweep drivers."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constitutive import L_coef, TruncationK
from .errors import DomainError, NSF2DError, ShapeError
from .grid import (
    BoundaryField,
    VectorField,
    boundary_integrate,
    boundary_trace,
    div,
    dot_cells,
    grad,
    integrate,
    node_weights,
)
from .fixedpoint import solve_coupled
from .subsolvers import State, dissipation_cells, theta0_boundary

# -- Helmholtz decomposition ---------------------------------------------------


@dataclass
class HelmholtzResult:
    phi: np.ndarray          # zero-mean potential on cells
    psi: np.ndarray          # stream function on nodes
    grad_phi: VectorField
    curl_psi: VectorField
    reconstruction_error: float
    div_curl_error: float


def _mean_zero_poisson(g, rhs):
    """Neumann Poisson solve -lap(phi) = rhs with exact zero-mean pinning."""
    from .subsolvers import neumann_laplacian

    n = g.nx * g.ny
    L = neumann_laplacian(g)
    w = np.full((n, 1), g.hx * g.hy)
    M = sp.bmat([[L, w], [w.T, None]]).tocsc()
    sol = spla.splu(M).solve(np.concatenate([rhs.ravel(), [0.0]]))
    return sol[:n].reshape(g.nx, g.ny)


def helmholtz_decompose(v, g, tol=1e-10):
    """Split v = grad(phi) + curl(psi) on the staggered grid.

    Requires v.n = 0 on the boundary (the Neumann problem is then exactly
    compatible by the discrete divergence theorem). The curl part is
    integrated exactly from the solenoidal remainder, whose discrete
    divergence vanishes cell by cell.
    """
    g.check(v.u, "ufaces", "u")
    g.check(v.v, "vfaces", "v")
    if v.boundary_normal_max() != 0.0:
        raise ShapeError("helmholtz_decompose requires v.n = 0 on the boundary")
    dv = div(g, v)
    phi = _mean_zero_poisson(g, -dv)
    gphi = grad(g, phi)
    ru = v.u - gphi.u
    rv = v.v - gphi.v
    # stream function: psi = 0 on the boundary nodes, column integration
    psi = np.zeros((g.nx + 1, g.ny + 1))
    psi[:, 1:] = g.hy * np.cumsum(ru, axis=1)
    curl = VectorField(
        (psi[:, 1:] - psi[:, :-1]) / g.hy,
        -(psi[1:, :] - psi[:-1, :]) / g.hx,
    )
    rec_u = v.u - gphi.u - curl.u
    rec_v = v.v - gphi.v - curl.v
    vnorm = np.sqrt(float(np.sum(v.u ** 2) + np.sum(v.v ** 2)))
    rec = np.sqrt(float(np.sum(rec_u ** 2) + np.sum(rec_v ** 2))) / max(vnorm, 1e-300)
    divc = float(np.max(np.abs(div(g, curl))))
    if rec > tol:
        raise NSF2DError(f"helmholtz reconstruction error {rec:.3e} above {tol:.1e}")
    return HelmholtzResult(phi, psi, gphi, curl, rec, divc)


# -- effective viscous flux -----------------------------------------------------


def compute_evf(state, mp, K, g):
    """G = -(2 mu + lam) div v + P(rho, theta) at cell centers."""
    return -(2.0 * mp.mu + mp.lam) * div(g, state.vel) + K.P(state.rho, state.theta)


def evf_stats(G, g, k, gamma, eta=None):
    """Sup and L2 norms of G plus the truncation-scaling ratio.

    eta defaults to (gamma - 3)/6; the ratio |G|_inf / (1 + k^(1+2g/3+eta))
    is reported, never certified.
    """
    if eta is None:
        eta = (gamma - 3.0) / 6.0
    g_inf = float(np.max(np.abs(G)))
    g_l2 = float(np.sqrt(dot_cells(g, G, G)))
    denom = 1.0 + k ** (1.0 + 2.0 * gamma / 3.0 + eta)
    return {"G_inf": g_inf, "G_L2": g_l2, "G_ratio": g_inf / denom, "eta": float(eta)}


# -- integrated balance residuals -------------------------------------------------


def _boundary_theta_terms(g, state, mp, ap):
    """Boundary traces and the transfer terms shared by both balances."""
    tr = boundary_trace(g, state.s)
    th0 = theta0_boundary(g, mp)

    def make(tw, t0w):
        theta = np.exp(tw)
        lw = L_coef(theta, mp.l, mp.a4)
        return theta, lw, t0w

    return tr, th0, make


def energy_balance_residual(state, mp, ap, K, g):
    """|boundary transfer - volume production| for the integrated energy law.

    Uses the solver's own discrete expressions (dissipation, traces), so the
    number measures coupling/quadrature error, not expression mismatch.
    """
    tr, th0, make = _boundary_theta_terms(g, state, mp, ap)
    lhs_parts = []
    for tw, t0w in ((tr.bottom, th0.bottom), (tr.top, th0.top),
                    (tr.left, th0.left), (tr.right, th0.right)):
        theta, lw, t0 = make(tw, t0w)
        lhs_parts.append(lw * (theta - t0) + ap.epsilon * tw)
    lhs = boundary_integrate(g, BoundaryField(*lhs_parts))
    diss = dissipation_cells(g, state.vel, mp.mu, mp.lam, mp.f)
    work = K.int_K(state.rho) * state.theta * div(g, state.vel)
    rhs = integrate(g, diss - work)
    return abs(lhs - rhs)


def entropy_balance_residual(state, mp, ap, K, g):
    """|LHS - RHS| of the integrated entropy identity; RHS is nonnegative."""
    tr, th0, make = _boundary_theta_terms(g, state, mp, ap)
    lhs_parts = []
    for tw, t0w in ((tr.bottom, th0.bottom), (tr.top, th0.top),
                    (tr.left, th0.left), (tr.right, th0.right)):
        theta, lw, t0 = make(tw, t0w)
        lhs_parts.append(lw * (theta - t0) / theta + ap.epsilon * tw * np.exp(-tw))
    lhs = boundary_integrate(g, BoundaryField(*lhs_parts))

    from .grid import cell_gradients, u_at_cells, v_at_cells

    uc = u_at_cells(g, state.vel.u)
    vc = v_at_cells(g, state.vel.v)
    dsx, dsy = cell_gradients(g, state.s)
    drx, dry = cell_gradients(g, state.rho)
    kc = K.K(state.rho)
    transport = kc * state.rho * (uc * dsx + vc * dsy) - kc * (uc * drx + vc * dry)
    lhs = lhs + integrate(g, transport)

    theta = state.theta
    diss = dissipation_cells(g, state.vel, mp.mu, mp.lam, mp.f)
    grad_s_sq = dsx ** 2 + dsy ** 2
    rhs_field = diss / theta + (1.0 + theta ** mp.m) * (ap.epsilon + theta) / theta * grad_s_sq
    if np.any(rhs_field < 0.0):
        raise NSF2DError("entropy production integrand must be nonnegative")
    rhs = integrate(g, rhs_field)
    return abs(lhs - rhs)


# -- norm panel --------------------------------------------------------------------


def _lp_norm_cells(g, field, p):
    return float(integrate(g, np.abs(field) ** p) ** (1.0 / p))


@dataclass
class NormPanel:
    v_H1: float
    Krho_L2gamma: float
    P_L2: float
    theta_L3m: float
    grad_theta_Lr: float
    r_exponent: float
    grad_s_L2: float
    boundary_exp_s: float

    def as_dict(self):
        return {
            "v_H1": self.v_H1,
            "Krho_L2gamma": self.Krho_L2gamma,
            "P_L2": self.P_L2,
            "theta_L3m": self.theta_L3m,
            "grad_theta_Lr": self.grad_theta_Lr,
            "grad_s_L2": self.grad_s_L2,
            "boundary_exp_s": self.boundary_exp_s,
        }


def norm_panel(state, mp, g, K):
    """The uniform-bound panel; r = min(2, 3m/(m+1)).

    H1 norm uses face-based gradients with node quadrature weights for the
    cross terms, stated here so reports reproduce bit for bit.
    """
    u, v = state.vel.u, state.vel.v
    wu = np.ones((g.nx + 1, g.ny))
    wu[0, :] = 0.5
    wu[-1, :] = 0.5
    wv = np.ones((g.nx, g.ny + 1))
    wv[:, 0] = 0.5
    wv[:, -1] = 0.5
    l2v_sq = (float(np.sum(wu * u ** 2)) + float(np.sum(wv * v ** 2))) * g.hx * g.hy
    dudx = (u[1:, :] - u[:-1, :]) / g.hx
    dvdy = (v[:, 1:] - v[:, :-1]) / g.hy
    nw = node_weights(g)
    dudy = np.zeros((g.nx + 1, g.ny + 1))
    dudy[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / g.hy
    dvdx = np.zeros((g.nx + 1, g.ny + 1))
    dvdx[1:-1, :] = (v[1:, :] - v[:-1, :]) / g.hx
    gradv_sq = (
        float(np.sum(dudx ** 2 + dvdy ** 2)) * g.hx * g.hy
        + float(np.sum(nw * (dudy ** 2 + dvdx ** 2)))
    )
    v_h1 = float(np.sqrt(l2v_sq + gradv_sq))

    krho = K.K(state.rho) * state.rho
    theta = state.theta
    pfield = K.P(state.rho, theta)
    r_exp = min(2.0, 3.0 * mp.m / (mp.m + 1.0))
    gth = grad(g, theta)
    grad_theta_r = float(
        (
            (np.sum(np.abs(gth.u[1:-1, :]) ** r_exp) + np.sum(np.abs(gth.v[:, 1:-1]) ** r_exp))
            * g.hx
            * g.hy
        )
        ** (1.0 / r_exp)
    )
    gs = grad(g, state.s)
    grad_s_2 = float(
        np.sqrt((np.sum(gs.u[1:-1, :] ** 2) + np.sum(gs.v[:, 1:-1] ** 2)) * g.hx * g.hy)
    )
    tr = boundary_trace(g, state.s)
    bexp = boundary_integrate(g, tr.map(lambda z: np.exp(z) + np.exp(-z)))
    return NormPanel(
        v_H1=v_h1,
        Krho_L2gamma=_lp_norm_cells(g, krho, 2.0 * mp.gamma),
        P_L2=_lp_norm_cells(g, pfield, 2.0),
        theta_L3m=_lp_norm_cells(g, theta, 3.0 * mp.m),
        grad_theta_Lr=grad_theta_r,
        r_exponent=r_exp,
        grad_s_L2=grad_s_2,
        boundary_exp_s=bexp,
    )


# -- overshoot measure ---------------------------------------------------------------


def overshoot_measure(rho, k, g):
    """Volume fraction of the domain where rho exceeds k - 3."""
    if k <= 3.0:
        raise DomainError("overshoot_measure requires k > 3")
    g.check(rho, "cells", "rho")
    return integrate(g, (rho > k - 3.0).astype(float)) / g.area


# -- assembled diagnostics -------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    panel: NormPanel
    energy_residual: float
    entropy_residual: float
    G_inf: float
    G_L2: float
    G_ratio: float
    eta: float
    overshoot: float
    max_rho_minus_k: float
    trunc_inactive: bool
    mass: float
    condition_5_1: float

    def to_lines(self):
        d = self.panel.as_dict()
        lines = [f"norm {name}: {val:.12e}" for name, val in d.items()]
        lines.append(f"r exponent: {self.panel.r_exponent:g}")
        lines.append(f"energy balance residual: {self.energy_residual:.12e}")
        lines.append(f"entropy balance residual: {self.entropy_residual:.12e}")
        lines.append(f"G sup norm: {self.G_inf:.12e}")
        lines.append(f"G L2 norm: {self.G_L2:.12e}")
        lines.append(f"G scaling ratio (eta={self.eta:g}): {self.G_ratio:.12e}")
        lines.append(f"overshoot measure: {self.overshoot:.12e}")
        lines.append(f"max rho - k: {self.max_rho_minus_k:.12e}")
        lines.append(f"truncation inactive (max rho <= k): {str(self.trunc_inactive).lower()}")
        lines.append(f"total mass: {self.mass:.12e}")
        lines.append(f"pinch condition (k-3)/k (k-3)^g - |G|_inf: {self.condition_5_1:.12e}")
        return lines


def compute_diagnostics(state, mp, ap, K, g, eta=None):
    panel = norm_panel(state, mp, g, K)
    G = compute_evf(state, mp, K, g)
    stats = evf_stats(G, g, ap.k, mp.gamma, eta)
    max_rho = float(np.max(state.rho))
    pinch = (ap.k - 3.0) / ap.k * (ap.k - 3.0) ** mp.gamma - stats["G_inf"] if ap.k > 3 else float("nan")
    return DiagnosticsReport(
        panel=panel,
        energy_residual=energy_balance_residual(state, mp, ap, K, g),
        entropy_residual=entropy_balance_residual(state, mp, ap, K, g),
        G_inf=stats["G_inf"],
        G_L2=stats["G_L2"],
        G_ratio=stats["G_ratio"],
        eta=stats["eta"],
        overshoot=overshoot_measure(state.rho, ap.k, g) if ap.k > 3 else float("nan"),
        max_rho_minus_k=max_rho - ap.k,
        trunc_inactive=bool(max_rho <= ap.k),
        mass=integrate(g, state.rho),
        condition_5_1=pinch,
    )


# -- sweep drivers ------------------------------------------------------------------------


SWEEP_COLUMNS = [
    "param",
    "v_H1",
    "Krho_L2gamma",
    "P_L2",
    "theta_L3m",
    "grad_theta_Lr",
    "grad_s_L2",
    "boundary_exp_s",
    "energy_residual",
    "entropy_residual",
    "G_inf",
    "G_L2",
    "G_ratio",
    "overshoot",
    "max_rho_minus_k",
    "trunc_inactive",
    "pinch_5_1",
    "mass",
    "iterations",
    "status",
]


@dataclass
class SweepPoint:
    param: float
    status: str
    iterations: int
    diagnostics: DiagnosticsReport | None = None
    state: State | None = None

    def row(self):
        d = self.diagnostics
        if d is None:
            vals = [float("nan")] * (len(SWEEP_COLUMNS) - 3)
            return [self.param] + vals + [self.iterations, self.status]
        p = d.panel
        return [
            self.param,
            p.v_H1,
            p.Krho_L2gamma,
            p.P_L2,
            p.theta_L3m,
            p.grad_theta_Lr,
            p.grad_s_L2,
            p.boundary_exp_s,
            d.energy_residual,
            d.entropy_residual,
            d.G_inf,
            d.G_L2,
            d.G_ratio,
            d.overshoot,
            d.max_rho_minus_k,
            d.trunc_inactive,
            d.condition_5_1,
            d.mass,
            self.iterations,
            self.status,
        ]


@dataclass
class SweepResult:
    parameter: str
    points: list = field(default_factory=list)

    @property
    def all_converged(self):
        return all(p.status == "converged" for p in self.points)

    def rows(self):
        return [p.row() for p in self.points]


def _check_sweep_values(values):
    vals = [float(v) for v in values]
    if not vals:
        raise DomainError("sweep values must be nonempty")
    if any(v <= 0.0 for v in vals):
        raise DomainError("sweep values must be positive")
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    if not (increasing or decreasing):
        raise DomainError("sweep values must be sorted")
    return vals


def _sweep(parameter, values, initial, schedule, mp, ap, K, g, opts, eta=None):
    """Warm-started sweep; failed points restart once from rest, then record."""
    result = SweepResult(parameter=parameter)
    warm = initial.copy()
    warm_schedule = None
    for val in values:
        if parameter == "epsilon":
            ap_i = type(ap)(val, ap.k, ap.t, ap.M, ap.area)
            K_i = K
        else:
            ap_i = type(ap)(ap.epsilon, val, ap.t, ap.M, ap.area)
            K_i = TruncationK(k=val, gamma=mp.gamma, a1=mp.a1, a2=mp.a2)
        tried = []
        sched_warm = warm_schedule or schedule
        tried.append((warm.copy(), sched_warm))
        tried.append((State.rest(g, ap_i.h), schedule))
        point = None
        for init, sched in tried:
            try:
                st, rep = solve_coupled(init, sched, mp, ap_i, K_i, g, opts)
            except NSF2DError as exc:
                point = SweepPoint(val, f"error: {exc}", 0)
                continue
            if rep.success:
                point = SweepPoint(
                    val,
                    "converged",
                    rep.total_iterations,
                    compute_diagnostics(st, mp, ap_i, K_i, g, eta),
                    st,
                )
                warm = st.copy()
                # once warm, later points only need the t = 1 stage
                warm_schedule = type(schedule)(
                    t_steps=(1.0,),
                    alpha=schedule.alpha,
                    stage_tol=schedule.stage_tol,
                    max_outer=schedule.max_outer,
                    t_floor=schedule.t_floor,
                    anderson_window=schedule.anderson_window,
                )
                break
            point = SweepPoint(val, "failed", rep.total_iterations)
        result.points.append(point)
    return result


def sweep_epsilon(values, initial, schedule, mp, ap, K, g, opts=None, eta=None):
    vals = _check_sweep_values(values)
    return _sweep("epsilon", vals, initial, schedule, mp, ap, K, g, opts, eta)


def sweep_k(values, initial, schedule, mp, ap, K, g, opts=None, eta=None):
    vals = _check_sweep_values(values)
    for v in vals:
        if ap.h >= v:
            raise DomainError(f"k = {v:g} must stay above the mean density h = {ap.h:g}")
    return _sweep("k", vals, initial, schedule, mp, ap, K, g, opts, eta)
