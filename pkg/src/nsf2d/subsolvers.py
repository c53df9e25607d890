"""The three elliptic sub-problems of the coupled fixed-point map.

* regularized continuity: eps*rho - eps*lap(rho) + div(K(rho) rho v) = eps*h*K(rho),
  zero normal density flux; upwind convection, Picard lagging of K (Newton
  optional). Solved in the eps-scaled form so that constants are exact.
* momentum: -div S(w) = t * [skew-symmetrized convection at the lagged
  velocity - grad P + K(rho) rho F], impermeable walls with the Navier slip
  closure mu dw_tau/dn + f w_tau = 0 (flat walls, curvature terms vanish).
* entropy: Newton on the Kirchhoff-transformed equation -a3*lap Phi(z) =
  t * [...], flux boundary condition a3*Phi'(z) dz/dn + eps*z
  + t*L(e^z)(e^z - theta0) = 0.

Ghost conventions are stated next to where they are built. All solves are
deterministic: identical inputs give bit-identical outputs.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as kern
from .constitutive import Phi, Phi_prime, phi_cap
from .errors import (
    LinearSolveError,
    NonConvergenceError,
    SchemeViolationError,
    ShapeError,
)
from .grid import (
    BoundaryField,
    VectorField,
    boundary_trace,
    cell_gradients,
    cells_to_nodes,
    cells_to_ufaces,
    cells_to_vfaces,
    div,
    integrate,
    read_field_blocks,
    u_at_cells,
    v_at_cells,
    write_field_blocks,
)


# -- state and options -------------------------------------------------------


@dataclass
class State:
    """Discrete fields: density, face velocity, entropy variable s = ln(theta)."""

    rho: np.ndarray
    vel: VectorField
    s: np.ndarray

    @property
    def theta(self):
        return np.exp(self.s)

    @classmethod
    def rest(cls, g, h):
        """Exact solution of the force-free, theta0 = 1 problem."""
        return cls(np.full((g.nx, g.ny), float(h)), VectorField.zeros(g), np.zeros((g.nx, g.ny)))

    def copy(self):
        return State(self.rho.copy(), self.vel.copy(), self.s.copy())

    def validate(self, g):
        g.check(self.rho, "cells", "rho")
        g.check(self.s, "cells", "s")
        g.check(self.vel.u, "ufaces", "u")
        g.check(self.vel.v, "vfaces", "v")
        if self.vel.boundary_normal_max() != 0.0:
            raise ShapeError("velocity must satisfy v.n = 0 on boundary faces")
        if np.min(self.rho) < -1e-12:
            raise SchemeViolationError(f"negative density: min rho = {np.min(self.rho):g}")
        if not (np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.s))
                and np.all(np.isfinite(self.vel.u)) and np.all(np.isfinite(self.vel.v))):
            raise SchemeViolationError("non-finite state field")

    def save(self, path, g):
        write_field_blocks(
            path,
            g,
            {
                "rho": ("cells", self.rho),
                "u": ("ufaces", self.vel.u),
                "v": ("vfaces", self.vel.v),
                "s": ("cells", self.s),
            },
        )

    @classmethod
    def load(cls, path):
        g, fields = read_field_blocks(path)
        return g, cls(fields["rho"][1], VectorField(fields["u"][1], fields["v"][1]), fields["s"][1])


@dataclass
class ManufacturedForcing:
    """Extra sources for verification runs; arrays on the full staggering."""

    continuity: np.ndarray | None = None
    momentum_u: np.ndarray | None = None
    momentum_v: np.ndarray | None = None
    entropy: np.ndarray | None = None
    entropy_bnd: BoundaryField | None = None


@dataclass
class SolveOptions:
    newton_tol: float = 1e-11
    max_iter: int = 60
    picard_damping: float = 1.0
    linear_solver_tol: float = 1e-10
    continuity_method: str = "picard"  # or "newton"
    mass_tol: float = 5e-13
    forcing: ManufacturedForcing | None = None

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.linear_solver_tol > 0 and self.mass_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (0.0 < self.picard_damping <= 1.0):
            raise ValueError("picard_damping must lie in (0, 1]")
        if self.continuity_method not in ("picard", "newton"):
            raise ValueError("continuity_method must be 'picard' or 'newton'")


@dataclass
class SolveTrace:
    solver: str
    records: list = field(default_factory=list)  # (iteration, residual, damping)
    converged: bool = False

    def add(self, iteration, residual, damping=1.0):
        self.records.append((int(iteration), float(residual), float(damping)))

    @property
    def iterations(self):
        return len(self.records)

    def to_lines(self):
        lines = [f"trace {self.solver} converged={str(self.converged).lower()}"]
        for it, res, damp in self.records:
            lines.append(f"  iter {it} residual {res:.6e} damping {damp:g}")
        return lines


def _rms(a):
    return float(np.sqrt(np.mean(np.asarray(a) ** 2)))


# -- cached discrete operators -------------------------------------------------


@lru_cache(maxsize=16)
def neumann_laplacian(g):
    """Matrix of -lap with mirror ghosts (zero normal flux), cells row-major."""

    def lap1d(n, h):
        main = 2.0 * np.ones(n)
        main[0] = 1.0
        main[-1] = 1.0
        off = -np.ones(n - 1)
        return sp.diags([off, main, off], [-1, 0, 1]) / h ** 2

    return (
        sp.kron(lap1d(g.nx, g.hx), sp.identity(g.ny))
        + sp.kron(sp.identity(g.nx), lap1d(g.ny, g.hy))
    ).tocsr()


@lru_cache(maxsize=16)
def gradient_ops(g):
    """Sparse twins of grid.cell_gradients (one-sided 2nd order at walls)."""
    nx, ny = g.nx, g.ny
    ids = np.arange(nx * ny).reshape(nx, ny)

    def one_dir(n, h, idgrid, axis):
        rows, cols, vals = [], [], []

        def take(sl):
            return (idgrid[sl, :] if axis == 0 else idgrid[:, sl]).ravel()

        # interior: centered
        mid = slice(1, n - 1)
        rows += [take(mid), take(mid)]
        if axis == 0:
            cols += [ids[2:, :].ravel(), ids[:-2, :].ravel()]
        else:
            cols += [ids[:, 2:].ravel(), ids[:, :-2].ravel()]
        m = len(rows[-1])
        vals += [np.full(m, 0.5 / h), np.full(m, -0.5 / h)]
        # low wall: (-3 f0 + 4 f1 - f2)/(2h)
        for idx, coef in ((0, -1.5), (1, 2.0), (2, -0.5)):
            rows.append(take(0))
            cols.append(take(idx))
            vals.append(np.full(len(rows[-1]), coef / h))
        # high wall
        for idx, coef in ((n - 1, 1.5), (n - 2, -2.0), (n - 3, 0.5)):
            rows.append(take(n - 1))
            cols.append(take(idx))
            vals.append(np.full(len(rows[-1]), coef / h))
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(nx * ny, nx * ny),
        ).tocsr()

    return one_dir(nx, g.hx, ids, 0), one_dir(ny, g.hy, ids, 1)


def wall_shear_coef(mu, f, h):
    """Shear stress at a flat wall under the slip closure: S12 = c * u_cell."""
    return 2.0 * mu * f / (2.0 * mu + f * h)


def slip_ghost_coef(mu, f, h):
    """Ghost tangential velocity = c * first interior value."""
    return (2.0 * mu - f * h) / (2.0 * mu + f * h)


@dataclass(frozen=True)
class MomentumOperator:
    """Assembled Lame operator plus the building blocks reused elsewhere.

    GXU/GYV map interior-face unknowns to cell divergence parts; DCU/DCV
    map cell scalars to face differences (the discrete gradient rows).
    """

    A: object
    lu: object
    GXU: object
    GYV: object
    DCU: object
    DCV: object


@lru_cache(maxsize=16)
def momentum_operator(g, mu, lam, f):
    """Lame operator -div S(w) on interior faces, slip walls folded in.

    Unknown layout: u interior faces first (row-major), then v interior.
    """
    nx, ny, hx, hy = g.nx, g.ny, g.hx, g.hy
    NU = (nx - 1) * ny
    NV = nx * (ny - 1)
    NC = nx * ny
    NN = (nx + 1) * (ny + 1)

    def iu(i, j):
        return (i - 1) * ny + j

    def iv(i, j):
        # local index within the v block
        return i * (ny - 1) + (j - 1)

    def ic(i, j):
        return i * ny + j

    def inode(i, j):
        return i * (ny + 1) + j

    II, JJ = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")

    def coo(rows, cols, vals, shape):
        return sp.coo_matrix(
            (np.concatenate([np.asarray(v, dtype=float).ravel() for v in vals]),
             (np.concatenate([np.asarray(r).ravel() for r in rows]),
              np.concatenate([np.asarray(c).ravel() for c in cols]))),
            shape=shape,
        ).tocsr()

    # du/dx at cells from interior u unknowns
    rows, cols, vals = [], [], []
    msk = II + 1 <= nx - 1
    rows.append(ic(II, JJ)[msk])
    cols.append(iu(II + 1, JJ)[msk])
    vals.append(np.full(msk.sum(), 1.0 / hx))
    msk = II >= 1
    rows.append(ic(II, JJ)[msk])
    cols.append(iu(II, JJ)[msk])
    vals.append(np.full(msk.sum(), -1.0 / hx))
    GXU = coo(rows, cols, vals, (NC, NU))

    rows, cols, vals = [], [], []
    msk = JJ + 1 <= ny - 1
    rows.append(ic(II, JJ)[msk])
    cols.append(iv(II, JJ + 1)[msk])
    vals.append(np.full(msk.sum(), 1.0 / hy))
    msk = JJ >= 1
    rows.append(ic(II, JJ)[msk])
    cols.append(iv(II, JJ)[msk])
    vals.append(np.full(msk.sum(), -1.0 / hy))
    GYV = coo(rows, cols, vals, (NC, NV))

    # shear S12 on nodes; wall rows carry the friction closure
    cfy = wall_shear_coef(mu, f, hy)
    cfx = wall_shear_coef(mu, f, hx)
    NI, NJ = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")
    nmid = NI.size
    ii = np.arange(1, nx)
    jj = np.arange(1, ny)
    rows_u = [inode(NI, NJ), inode(NI, NJ), inode(ii, 0), inode(ii, ny)]
    cols_u = [iu(NI, NJ), iu(NI, NJ - 1), iu(ii, 0), iu(ii, ny - 1)]
    vals_u = [np.full(nmid, mu / hy), np.full(nmid, -mu / hy),
              np.full(ii.size, cfy), np.full(ii.size, -cfy)]
    SHU = coo(rows_u, cols_u, vals_u, (NN, NU))
    rows_v = [inode(NI, NJ), inode(NI, NJ), inode(0, jj), inode(nx, jj)]
    cols_v = [iv(NI, NJ), iv(NI - 1, NJ), iv(0, jj), iv(nx - 1, jj)]
    vals_v = [np.full(nmid, mu / hx), np.full(nmid, -mu / hx),
              np.full(jj.size, cfx), np.full(jj.size, -cfx)]
    SHV = coo(rows_v, cols_v, vals_v, (NN, NV))

    # row difference operators
    UI, UJ = np.meshgrid(np.arange(1, nx), np.arange(ny), indexing="ij")
    DCU = coo(
        [iu(UI, UJ), iu(UI, UJ)],
        [ic(UI, UJ), ic(UI - 1, UJ)],
        [np.full(UI.size, 1.0 / hx), np.full(UI.size, -1.0 / hx)],
        (NU, NC),
    )
    DNU = coo(
        [iu(UI, UJ), iu(UI, UJ)],
        [inode(UI, UJ + 1), inode(UI, UJ)],
        [np.full(UI.size, 1.0 / hy), np.full(UI.size, -1.0 / hy)],
        (NU, NN),
    )
    VI, VJ = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
    DCV = coo(
        [iv(VI, VJ), iv(VI, VJ)],
        [ic(VI, VJ), ic(VI, VJ - 1)],
        [np.full(VI.size, 1.0 / hy), np.full(VI.size, -1.0 / hy)],
        (NV, NC),
    )
    DNV = coo(
        [iv(VI, VJ), iv(VI, VJ)],
        [inode(VI + 1, VJ), inode(VI, VJ)],
        [np.full(VI.size, 1.0 / hx), np.full(VI.size, -1.0 / hx)],
        (NV, NN),
    )

    S11 = sp.hstack([(2.0 * mu + lam) * GXU, lam * GYV]).tocsr()
    S22 = sp.hstack([lam * GXU, (2.0 * mu + lam) * GYV]).tocsr()
    SH = sp.hstack([SHU, SHV]).tocsr()

    A_u = -DCU @ S11 - DNU @ SH
    A_v = -DCV @ S22 - DNV @ SH
    A = sp.vstack([A_u, A_v]).tocsc()
    return MomentumOperator(A, spla.splu(A), GXU, GYV, DCU, DCV)


# -- shared discrete expressions -------------------------------------------------


def slip_ghost_u(g, u, mu, f):
    """u with ghost rows below/above the walls per the slip closure."""
    c = slip_ghost_coef(mu, f, g.hy)
    ext = np.empty((g.nx + 1, g.ny + 2))
    ext[:, 1:-1] = u
    ext[:, 0] = c * u[:, 0]
    ext[:, -1] = c * u[:, -1]
    return ext


def slip_ghost_v(g, v, mu, f):
    c = slip_ghost_coef(mu, f, g.hx)
    ext = np.empty((g.nx + 2, g.ny + 1))
    ext[1:-1, :] = v
    ext[0, :] = c * v[0, :]
    ext[-1, :] = c * v[-1, :]
    return ext


def dissipation_cells(g, vel, mu, lam, f):
    """S(v):grad v at cell centers by averaging face/node gradients.

    The same expression feeds the entropy right side and the balance
    diagnostics, so balance residuals measure coupling error only.
    """
    u, v = vel.u, vel.v
    hx, hy = g.hx, g.hy
    d11 = (u[1:, :] - u[:-1, :]) / hx
    d22 = (v[:, 1:] - v[:, :-1]) / hy
    dv = d11 + d22
    d12n = np.zeros((g.nx + 1, g.ny + 1))
    d12n[1:-1, 1:-1] = 0.5 * (
        (u[1:-1, 1:] - u[1:-1, :-1]) / hy + (v[1:, 1:-1] - v[:-1, 1:-1]) / hx
    )
    d12n[1:-1, 0] = f * u[1:-1, 0] / (2.0 * mu + f * hy)
    d12n[1:-1, -1] = -f * u[1:-1, -1] / (2.0 * mu + f * hy)
    d12n[0, 1:-1] = f * v[0, 1:-1] / (2.0 * mu + f * hx)
    d12n[-1, 1:-1] = -f * v[-1, 1:-1] / (2.0 * mu + f * hx)
    d12c = 0.25 * (d12n[:-1, :-1] + d12n[1:, :-1] + d12n[:-1, 1:] + d12n[1:, 1:])
    return 2.0 * mu * (d11 ** 2 + d22 ** 2 + 2.0 * d12c ** 2) + lam * dv ** 2


def convective_terms(g, krho, vel, mu, f):
    """Skew-symmetrized convection at interior faces:
    1/2 div(K rho v x v) + 1/2 K rho (v . grad) v."""
    u, v = vel.u, vel.v
    hx, hy = g.hx, g.hy
    u_ext = slip_ghost_u(g, u, mu, f)
    v_ext = slip_ghost_v(g, v, mu, f)

    krho_n = cells_to_nodes(g, krho)
    ubar_n = 0.5 * (u_ext[:, :-1] + u_ext[:, 1:])
    vbar_n = 0.5 * (v_ext[:-1, :] + v_ext[1:, :])
    nd = krho_n * ubar_n * vbar_n

    ubar_c = 0.5 * (u[:-1, :] + u[1:, :])
    cc_u = krho * ubar_c ** 2
    conv_u = 0.5 * (
        (cc_u[1:, :] - cc_u[:-1, :]) / hx + (nd[1:-1, 1:] - nd[1:-1, :-1]) / hy
    )
    krho_uf = 0.5 * (krho[:-1, :] + krho[1:, :])
    dudx_f = (u[2:, :] - u[:-2, :]) / (2.0 * hx)
    v_at_uf = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    dudy_f = (u_ext[1:-1, 2:] - u_ext[1:-1, :-2]) / (2.0 * hy)
    conv_u += 0.5 * krho_uf * (u[1:-1, :] * dudx_f + v_at_uf * dudy_f)

    vbar_c = 0.5 * (v[:, :-1] + v[:, 1:])
    cc_v = krho * vbar_c ** 2
    conv_v = 0.5 * (
        (nd[1:, 1:-1] - nd[:-1, 1:-1]) / hx + (cc_v[:, 1:] - cc_v[:, :-1]) / hy
    )
    krho_vf = 0.5 * (krho[:, :-1] + krho[:, 1:])
    dvdy_f = (v[:, 2:] - v[:, :-2]) / (2.0 * hy)
    u_at_vf = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])
    dvdx_f = (v_ext[2:, 1:-1] - v_ext[:-2, 1:-1]) / (2.0 * hx)
    conv_v += 0.5 * krho_vf * (v[:, 1:-1] * dvdy_f + u_at_vf * dvdx_f)
    return conv_u, conv_v


# -- continuity ------------------------------------------------------------------


def _continuity_forcing(opts):
    if opts is not None and opts.forcing is not None:
        return opts.forcing.continuity
    return None


def continuity_residual(rho, vel, ap, K, g, forcing=None):
    """Residual field of the eps-form equation (same stencils as the solve)."""
    lap = neumann_laplacian(g)
    kl = K.K(rho)
    conv = kern.upwind_div(vel.u, vel.v, kl * rho, g.hx, g.hy)
    res = (
        ap.epsilon * rho
        + ap.epsilon * (lap @ rho.ravel()).reshape(rho.shape)
        + conv
        - ap.epsilon * ap.h * kl
    )
    if forcing is not None:
        res = res - forcing
    return res


def solve_continuity(vel, ap, K, g, opts=None, rho0=None):
    """Solve the regularized continuity problem; returns (rho, trace).

    Picard on the lagged truncation factor (M-matrix, positivity preserved);
    optional full Newton. Convergence requires both the nonlinear residual
    and the discrete mass-identity gap |int rho - h int K(rho)| to be small.
    """
    opts = opts or SolveOptions()
    g.check(vel.u, "ufaces", "u")
    g.check(vel.v, "vfaces", "v")
    if vel.boundary_normal_max() != 0.0:
        raise ShapeError("solve_continuity requires v.n = 0 on boundary faces")
    eps, h, k = ap.epsilon, ap.h, ap.k
    n = g.nx * g.ny
    lap = neumann_laplacian(g)
    base = (sp.identity(n) + lap).tocsr()
    gsrc = _continuity_forcing(opts)
    trace = SolveTrace("continuity")
    alpha = opts.picard_damping
    x = np.full((g.nx, g.ny), h) if rho0 is None else np.asarray(rho0, dtype=float).copy()
    best_rel = np.inf
    stall = 0

    for it in range(1, opts.max_iter + 1):
        kl = K.K(x)
        rows, cols, vals = kern.upwind_matrix(vel.u, vel.v, kl, g.hx, g.hy)
        C = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        A = (base + C / eps).tocsc()
        b = h * kl.ravel()
        if gsrc is not None:
            b = b + gsrc.ravel() / eps
        if opts.continuity_method == "newton" and it > 1:
            # Newton step on the full nonlinearity
            res = continuity_residual(x, vel, ap, K, g, gsrc) / eps
            kp = K.K_prime(x)
            rowsJ, colsJ, valsJ = kern.upwind_matrix(
                vel.u, vel.v, kl + x * kp, g.hx, g.hy
            )
            CJ = sp.coo_matrix((valsJ, (rowsJ, colsJ)), shape=(n, n)).tocsr()
            J = (base + CJ / eps - sp.diags(h * kp.ravel())).tocsc()
            xl = x - spla.splu(J).solve(res.ravel()).reshape(x.shape)
        else:
            lu = spla.splu(A)
            xf = lu.solve(b)
            xf = xf + lu.solve(b - A @ xf)
            # columns of the scheme sum to the identity (conservative fluxes),
            # so sum(x) = sum(b) holds exactly for the true solution; project
            # the factorization's smooth error component onto that identity
            xf += (np.sum(b) - np.sum(xf)) / xf.size
            xl = xf.reshape(g.nx, g.ny)
        x = (1.0 - alpha) * x + alpha * xl
        if np.min(x) < -1e-12:
            raise SchemeViolationError(
                f"continuity produced negative density (min {np.min(x):g})"
            )
        res_field = continuity_residual(x, vel, ap, K, g, gsrc)
        scale = eps * (_rms(x) + h) + _rms(
            kern.upwind_div(vel.u, vel.v, K.K(x) * x, g.hx, g.hy)
        ) + 1e-300
        rel = _rms(res_field) / scale
        gap = abs(integrate(g, x) - h * integrate(g, K.K(x)))
        trace.add(it, rel, alpha)
        if rel <= opts.newton_tol and (gsrc is not None or gap <= opts.mass_tol):
            trace.converged = True
            break
        # lagged-K fixed point can cycle on the transition band; damp it down
        if rel < 0.9 * best_rel:
            best_rel = rel
            stall = 0
        else:
            stall += 1
            if stall >= 5 and alpha > 1.0 / 16.0:
                alpha *= 0.5
                stall = 0
    if not trace.converged:
        raise NonConvergenceError(
            f"continuity solve stalled (relative residual {rel:.3e}, mass gap {gap:.3e})",
            trace.records,
        )
    if np.max(x) > k + 1.0 + 1e-9 * (k + 1.0):
        raise SchemeViolationError(
            f"density exceeded the truncation ceiling: max rho = {np.max(x):g} > k+1"
        )
    return x, trace


# -- momentum --------------------------------------------------------------------


def momentum_rhs(rho, s, vel_lag, t, mp, K, g, opts=None):
    """Right side at interior faces: t*(-conv - grad P + K rho F) + forcing."""
    krho = K.K(rho) * rho
    P = K.P(rho, np.exp(s))
    conv_u, conv_v = convective_terms(g, krho, vel_lag, mp.mu, mp.f)
    dpdx = (P[1:, :] - P[:-1, :]) / g.hx
    dpdy = (P[:, 1:] - P[:, :-1]) / g.hy
    XU, YU = g.uface_coords()
    XV, YV = g.vface_coords()
    fx, _ = mp.F.eval(XU, YU, g.Lx, g.Ly)
    _, fy = mp.F.eval(XV, YV, g.Lx, g.Ly)
    krho_u = cells_to_ufaces(g, krho)
    krho_v = cells_to_vfaces(g, krho)
    rhs_u = t * (-conv_u - dpdx + (krho_u * fx)[1:-1, :])
    rhs_v = t * (-conv_v - dpdy + (krho_v * fy)[:, 1:-1])
    if opts is not None and opts.forcing is not None:
        if opts.forcing.momentum_u is not None:
            rhs_u = rhs_u + opts.forcing.momentum_u[1:-1, :]
        if opts.forcing.momentum_v is not None:
            rhs_v = rhs_v + opts.forcing.momentum_v[:, 1:-1]
    return rhs_u, rhs_v


def _pack(g, wu, wv):
    return np.concatenate([wu.ravel(), wv.ravel()])


def _unpack(g, x):
    NU = (g.nx - 1) * g.ny
    u = np.zeros((g.nx + 1, g.ny))
    v = np.zeros((g.nx, g.ny + 1))
    u[1:-1, :] = x[:NU].reshape(g.nx - 1, g.ny)
    v[:, 1:-1] = x[NU:].reshape(g.nx, g.ny - 1)
    return VectorField(u, v)


def solve_momentum(rho, s, vel_old, t, mp, K, g, opts=None):
    """Linear Lame solve with slip walls; convection lagged at vel_old."""
    opts = opts or SolveOptions()
    if mp.mu <= 0.0:
        raise SchemeViolationError("mu must be positive for the momentum solve")
    op = momentum_operator(g, mp.mu, mp.lam, mp.f)
    rhs_u, rhs_v = momentum_rhs(rho, s, vel_old, t, mp, K, g, opts)
    b = _pack(g, rhs_u, rhs_v)
    x = op.lu.solve(b)
    resid = np.max(np.abs(op.A @ x - b))
    scale = max(1.0, float(np.max(np.abs(b))))
    trace = SolveTrace("momentum")
    trace.add(1, resid / scale)
    if not np.all(np.isfinite(x)) or resid > opts.linear_solver_tol * scale:
        raise LinearSolveError(
            f"momentum linear solve residual {resid:.3e} above {opts.linear_solver_tol:.1e} * {scale:g}"
        )
    trace.converged = True
    return _unpack(g, x), trace


def momentum_residual(vel, rho, s, vel_lag, t, mp, K, g, opts=None):
    """Residual of -div S(vel) = rhs(rho, s, vel_lag) on interior faces."""
    op = momentum_operator(g, mp.mu, mp.lam, mp.f)
    rhs_u, rhs_v = momentum_rhs(rho, s, vel_lag, t, mp, K, g, opts)
    x = _pack(g, vel.u[1:-1, :], vel.v[:, 1:-1])
    return op.A @ x - _pack(g, rhs_u, rhs_v)


# -- entropy ---------------------------------------------------------------------


def theta0_boundary(g, mp):
    """Boundary temperature evaluated at boundary face midpoints."""
    return BoundaryField(
        mp.theta0.eval(g.xc, 0.0, g.Lx, g.Ly),
        mp.theta0.eval(g.xc, g.Ly, g.Lx, g.Ly),
        mp.theta0.eval(0.0, g.yc, g.Lx, g.Ly),
        mp.theta0.eval(g.Lx, g.yc, g.Lx, g.Ly),
    )


def _entropy_static(rho, vel, mp, K, g):
    """z-independent pieces of the entropy right side."""
    u, v = vel.u, vel.v
    intk = K.int_K(rho)
    krho = K.K(rho) * rho
    kc = K.K(rho)
    div_v_intk = div(g, VectorField(u * cells_to_ufaces(g, intk), v * cells_to_vfaces(g, intk)))
    div_krho_v = div(g, VectorField(u * cells_to_ufaces(g, krho), v * cells_to_vfaces(g, krho)))
    uc = u_at_cells(g, u)
    vc = v_at_cells(g, v)
    drx, dry = cell_gradients(g, rho)
    c0 = -div_v_intk - div_krho_v + kc * (uc * drx + vc * dry)
    diss = dissipation_cells(g, vel, mp.mu, mp.lam, mp.f)
    return krho, uc, vc, c0, diss


def _entropy_bflux(g, z, t, mp, ap, theta0, forcing):
    """Boundary flux contribution (per unit cell volume) and its z_f factor."""
    tr = boundary_trace(g, z)
    gb = forcing.entropy_bnd if (forcing is not None and forcing.entropy_bnd is not None) else None

    def wallterm(trw, th0, gbw):
        th = np.exp(trw)
        flux = ap.epsilon * trw + t * mp.a4 * (1.0 + th ** mp.l) * (th - th0)
        if gbw is not None:
            flux = flux - gbw
        dflux = ap.epsilon + t * mp.a4 * th * (
            mp.l * th ** (mp.l - 1.0) * (th - th0) + (1.0 + th ** mp.l)
        )
        return flux, dflux

    fb, db = wallterm(tr.bottom, theta0.bottom, None if gb is None else gb.bottom)
    ft, dt = wallterm(tr.top, theta0.top, None if gb is None else gb.top)
    fl, dl = wallterm(tr.left, theta0.left, None if gb is None else gb.left)
    fr, dr = wallterm(tr.right, theta0.right, None if gb is None else gb.right)
    return (fb, ft, fl, fr), (db, dt, dl, dr)


def entropy_residual(z, rho, vel, t, mp, ap, K, g, theta0=None, forcing=None, static=None):
    """Residual field of the transformed entropy equation."""
    if theta0 is None:
        theta0 = theta0_boundary(g, mp)
    if static is None:
        static = _entropy_static(rho, vel, mp, K, g)
    krho, uc, vc, c0, diss = static
    lap = neumann_laplacian(g)
    cap = phi_cap(mp.m)
    phi = Phi(z, ap.epsilon, mp.m, cap)
    R = mp.a3 * (lap @ phi.ravel()).reshape(z.shape)
    dzx, dzy = cell_gradients(g, z)
    ez = np.exp(z)
    rhs = diss + ez * (c0 - krho * (uc * dzx + vc * dzy))
    R = R - t * rhs
    if forcing is not None and forcing.entropy is not None:
        R = R - forcing.entropy
    (fb, ft, fl, fr), _ = _entropy_bflux(g, z, t, mp, ap, theta0, forcing)
    R[:, 0] += fb / g.hy
    R[:, -1] += ft / g.hy
    R[0, :] += fl / g.hx
    R[-1, :] += fr / g.hx
    return R


def _entropy_jacobian(z, rho, vel, t, mp, ap, K, g, theta0, forcing, static):
    krho, uc, vc, c0, diss = static
    lap = neumann_laplacian(g)
    DX, DY = gradient_ops(g)
    cap = phi_cap(mp.m)
    phip = Phi_prime(z, ap.epsilon, mp.m, cap)
    ez = np.exp(z)
    dzx, dzy = cell_gradients(g, z)
    J = mp.a3 * (lap @ sp.diags(phip.ravel()))
    diag_part = ez * (c0 - krho * (uc * dzx + vc * dzy))
    J = J - t * sp.diags(diag_part.ravel())
    J = J + t * (
        sp.diags((ez * krho * uc).ravel()) @ DX + sp.diags((ez * krho * vc).ravel()) @ DY
    )
    _, (db, dt, dl, dr) = _entropy_bflux(g, z, t, mp, ap, theta0, forcing)
    nx, ny = g.nx, g.ny
    ids = np.arange(nx * ny).reshape(nx, ny)
    rows = np.concatenate([ids[:, 0], ids[:, 0], ids[:, -1], ids[:, -1],
                           ids[0, :], ids[0, :], ids[-1, :], ids[-1, :]])
    cols = np.concatenate([ids[:, 0], ids[:, 1], ids[:, -1], ids[:, -2],
                           ids[0, :], ids[1, :], ids[-1, :], ids[-2, :]])
    vals = np.concatenate([1.5 * db / g.hy, -0.5 * db / g.hy,
                           1.5 * dt / g.hy, -0.5 * dt / g.hy,
                           1.5 * dl / g.hx, -0.5 * dl / g.hx,
                           1.5 * dr / g.hx, -0.5 * dr / g.hx])
    Jb = sp.coo_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    return (J + Jb).tocsc()


def solve_entropy(rho, vel, s_old, t, mp, ap, K, g, opts=None):
    """Damped Newton on the transformed entropy equation; returns (s, trace).

    theta = e^s stays positive and finite structurally; the transform cap
    turns runaway iterates into a PhiOverflowError the caller can damp.
    """
    opts = opts or SolveOptions()
    theta0 = theta0_boundary(g, mp)
    static = _entropy_static(rho, vel, mp, K, g)
    forcing = opts.forcing
    cap = phi_cap(mp.m)
    z = np.asarray(s_old, dtype=float).copy()
    trace = SolveTrace("entropy")

    R = entropy_residual(z, rho, vel, t, mp, ap, K, g, theta0, forcing, static)
    scale = 1.0 + _rms(t * static[4])
    if forcing is not None and forcing.entropy is not None:
        scale += _rms(forcing.entropy)
    best = _rms(R)
    for it in range(1, opts.max_iter + 1):
        rms = _rms(R)
        trace.add(it, rms / scale)
        if rms <= opts.newton_tol * scale:
            trace.converged = True
            break
        J = _entropy_jacobian(z, rho, vel, t, mp, ap, K, g, theta0, forcing, static)
        dz = spla.splu(J).solve(-R.ravel()).reshape(z.shape)
        lam_ls = 1.0
        while True:
            z_try = z + lam_ls * dz
            if np.max(np.abs(z_try)) <= cap:
                R_try = entropy_residual(z_try, rho, vel, t, mp, ap, K, g, theta0, forcing, static)
                rms_try = _rms(R_try)
                if rms_try <= (1.0 - 1e-4 * lam_ls) * rms or lam_ls <= 1.0 / 64.0:
                    break
            lam_ls *= 0.5
            if lam_ls < 1e-8:
                raise NonConvergenceError(
                    "entropy Newton line search failed", trace.records
                )
        z, R = z_try, R_try
        if _rms(R) > 10.0 * best and it > 3:
            raise NonConvergenceError("entropy Newton diverging", trace.records)
        best = min(best, _rms(R))
    if not trace.converged:
        raise NonConvergenceError(
            f"entropy Newton did not converge (relative residual {_rms(R) / scale:.3e})",
            trace.records,
        )
    if not np.all(np.isfinite(z)):
        raise SchemeViolationError("entropy solve produced non-finite s")
    return z, trace
