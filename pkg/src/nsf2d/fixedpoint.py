"""Outer driver: homotopy in t with damped iteration of the coupled map.

One application of the map takes (rho, v, s) to (S(v), w, z) through the
three sub-solves; the driver damps the (v, s) update, re-evaluates
rho = S(v) for the damped velocity (so rho = S(v) holds at convergence for
the converged v), and walks t up a schedule, halving the damping and then
the t-step when a stage misbehaves.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NSF2DError, SchemeViolationError
from .grid import integrate
from .subsolvers import (
    SolveOptions,
    State,
    continuity_residual,
    entropy_residual,
    momentum_operator,
    momentum_residual,
    neumann_laplacian,
    solve_continuity,
    solve_entropy,
    solve_momentum,
)


@dataclass(frozen=True)
class ContinuationSchedule:
    """Homotopy stages plus the stage-iteration controls.

    anderson_window > 0 turns on windowed Anderson mixing of the stage
    iteration (alpha is then the mixing weight); 0 falls back to plain
    damped iteration, which only contracts when alpha is below
    2/(1 + loop gain) and the pressure-density gain grows like t/epsilon.
    """

    t_steps: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    alpha: float = 0.5
    stage_tol: float = 1e-9
    max_outer: int = 200
    t_floor: float = 1.0 / 64.0
    anderson_window: int = 8

    def __post_init__(self):
        ts = tuple(float(t) for t in self.t_steps)
        if not ts or ts[-1] != 1.0:
            raise ValueError("t_steps must end at 1")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("t_steps must be strictly increasing")
        if any(t < 0.0 or t > 1.0 for t in ts):
            raise ValueError("t_steps must lie in [0, 1]")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.stage_tol <= 0 or self.max_outer < 1 or self.t_floor <= 0:
            raise ValueError("bad schedule parameters")
        object.__setattr__(self, "t_steps", ts)


@dataclass
class StageRecord:
    t: float
    alpha: float
    iterations: int = 0
    converged: bool = False
    update_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    failures: list = field(default_factory=list)


@dataclass
class FixedPointReport:
    stages: list = field(default_factory=list)
    success: bool = False
    final_residuals: dict = field(default_factory=dict)
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def total_iterations(self):
        return sum(s.iterations for s in self.stages)

    def to_lines(self):
        lines = [f"success: {str(self.success).lower()}"]
        for st in self.stages:
            lines.append(
                f"stage t={st.t:g} alpha={st.alpha:g} iterations={st.iterations} "
                f"converged={str(st.converged).lower()}"
            )
            for it, (up, res) in enumerate(zip(st.update_history, st.residual_history), 1):
                lines.append(f"  iter {it} update {up:.6e} residual {res:.6e}")
            for msg in st.failures:
                lines.append(f"  failure: {msg}")
        for k, v in self.final_residuals.items():
            lines.append(f"final residual {k}: {v:.6e}")
        for n in self.notes:
            lines.append(f"note: {n}")
        return lines


def _rms(a):
    return float(np.sqrt(np.mean(np.asarray(a) ** 2)))


def _rel_update(new, old):
    return _rms(new - old) / max(_rms(old), 1.0)


def coupled_residuals(state, t, mp, ap, K, g, opts=None):
    """RMS residuals of all three equations at the given state."""
    forc = opts.forcing if opts is not None else None
    cont = continuity_residual(state.rho, state.vel, ap, K, g,
                               None if forc is None else forc.continuity)
    mom = momentum_residual(state.vel, state.rho, state.s, state.vel, t, mp, K, g, opts)
    ent = entropy_residual(state.s, state.rho, state.vel, t, mp, ap, K, g,
                           forcing=forc)
    return {
        "continuity": _rms(cont),
        "momentum": _rms(mom),
        "entropy": _rms(ent),
    }


def apply_T(state, t, mp, ap, K, g, opts=None):
    """One application of the coupled map: rho = S(v), then w, then z."""
    opts = opts or SolveOptions()
    state.validate(g)
    rho, tr_c = solve_continuity(state.vel, ap, K, g, opts, rho0=state.rho)
    w, tr_m = solve_momentum(rho, state.s, state.vel, t, mp, K, g, opts)
    z, tr_e = solve_entropy(rho, state.vel, state.s, t, mp, ap, K, g, opts)
    out = State(rho, w, z)
    out.traces = {"continuity": tr_c, "momentum": tr_m, "entropy": tr_e}
    return out


def _pack_vs(state):
    return np.concatenate([state.vel.u.ravel(), state.vel.v.ravel(), state.s.ravel()])


def _unpack_vs(x, g, rho):
    nu = (g.nx + 1) * g.ny
    nv = g.nx * (g.ny + 1)
    from .grid import VectorField

    vel = VectorField(
        x[:nu].reshape(g.nx + 1, g.ny).copy(),
        x[nu : nu + nv].reshape(g.nx, g.ny + 1).copy(),
    )
    return State(rho, vel, x[nu + nv :].reshape(g.nx, g.ny).copy())


def _stage_preconditioner(g, mp, ap, K, t, s_mean):
    """Frozen-Jacobian solve for the stiff pressure-density loop.

    The regularized density responds to velocity divergence like 1/eps, so
    I - dT/dv has the form  dv -> dv - (t c / eps) A^-1 grad (I+L)^-1 div(h dv)
    with c = P_rho at the rest state. Applying its inverse amounts to one
    sparse solve of the bordered system below; the remaining couplings are
    O(1) and left to the Anderson mixing.
    """
    op = momentum_operator(g, mp.mu, mp.lam, mp.f)
    c = mp.a1 * mp.gamma * ap.h ** (mp.gamma - 1.0) * K.K(np.array(ap.h)) + mp.a2 * np.exp(s_mean)
    c = float(c)
    G = sp.vstack([op.DCU, op.DCV])
    D = sp.hstack([op.GXU, op.GYV])
    n_uv = G.shape[0]
    n_c = D.shape[0]
    M = sp.bmat(
        [
            [op.A, -t * c * G],
            [-(ap.h / ap.epsilon) * D, sp.identity(n_c) + neumann_laplacian(g)],
        ]
    ).tocsc()
    lu = spla.splu(M)
    A = op.A

    def apply(r_uv):
        rhs = np.concatenate([A @ r_uv, np.zeros(n_c)])
        return lu.solve(rhs)[:n_uv]

    return apply


def _run_stage(state, t, alpha, schedule, mp, ap, K, g, opts, record):
    """Anderson-mixed, preconditioned iteration of the map on (v, s).

    rho is re-evaluated as S(v) inside every map application, so the
    density never leaves the range of the continuity operator.
    """
    cur = state.copy()
    x = _pack_vs(cur)
    n_uv = (g.nx + 1) * g.ny + g.nx * (g.ny + 1)
    nu_int = (g.nx - 1) * g.ny
    precond = _stage_preconditioner(g, mp, ap, K, t, float(np.mean(cur.s)))

    def precondition(r):
        # interior-face components pass through the frozen Jacobian solve
        ru = r[: (g.nx + 1) * g.ny].reshape(g.nx + 1, g.ny)
        rv = r[(g.nx + 1) * g.ny : n_uv].reshape(g.nx, g.ny + 1)
        r_int = np.concatenate([ru[1:-1, :].ravel(), rv[:, 1:-1].ravel()])
        d_int = precond(r_int)
        du = np.zeros_like(ru)
        dv = np.zeros_like(rv)
        du[1:-1, :] = d_int[:nu_int].reshape(g.nx - 1, g.ny)
        dv[:, 1:-1] = d_int[nu_int:].reshape(g.nx, g.ny - 1)
        out = r.copy()
        out[: (g.nx + 1) * g.ny] = du.ravel()
        out[(g.nx + 1) * g.ny : n_uv] = dv.ravel()
        return out
    dx_hist, dr_hist = [], []
    r_prev = None
    x_prev = None
    best_rnorm = np.inf
    for it in range(1, schedule.max_outer + 1):
        mapped = apply_T(cur, t, mp, ap, K, g, opts)
        r = precondition(_pack_vs(mapped) - x)
        rnorm = _rms(r)
        if not np.isfinite(rnorm):
            raise SchemeViolationError("non-finite fixed-point residual")
        if rnorm > 1e3 * max(best_rnorm, 1.0):
            raise NSF2DError(f"stage t={t:g} iteration diverging (residual {rnorm:.3e})")
        best_rnorm = min(best_rnorm, rnorm)

        # windowed Anderson step on the preconditioned residual
        if r_prev is not None and schedule.anderson_window > 0:
            dx_hist.append(x - x_prev)
            dr_hist.append(r - r_prev)
            if len(dx_hist) > schedule.anderson_window:
                dx_hist.pop(0)
                dr_hist.pop(0)
        x_prev, r_prev = x, r
        x_new = None
        if dr_hist:
            DR = np.stack(dr_hist, axis=1)
            DXm = np.stack(dx_hist, axis=1)
            gamma, *_ = np.linalg.lstsq(DR, r, rcond=1e-12)
            if np.all(np.isfinite(gamma)) and np.linalg.norm(gamma) <= 1e6:
                x_new = x + alpha * r - (DXm + alpha * DR) @ gamma
        if x_new is None:
            x_new = x + alpha * r
        x = x_new

        new = _unpack_vs(x, g, mapped.rho)
        new_rho, _ = solve_continuity(new.vel, ap, K, g, opts, rho0=mapped.rho)
        new.rho = new_rho
        new.validate(g)
        mass = integrate(g, new.rho)
        if mass > mp.M + 1e-12:
            raise SchemeViolationError(f"mass bound violated: int rho = {mass!r} > M")
        update = max(
            _rel_update(new.rho, cur.rho),
            _rel_update(new.vel.u, cur.vel.u),
            _rel_update(new.vel.v, cur.vel.v),
            _rel_update(new.s, cur.s),
        )
        resid = max(coupled_residuals(new, t, mp, ap, K, g, opts).values())
        record.update_history.append(update)
        record.residual_history.append(resid)
        record.iterations = it
        cur = new
        if update <= schedule.stage_tol and resid <= schedule.stage_tol:
            record.converged = True
            return cur
    raise NSF2DError(
        f"stage t={t:g} not converged after {schedule.max_outer} iterations "
        f"(update {update:.3e}, residual {resid:.3e})"
    )


def solve_coupled(initial, schedule, mp, ap, K, g, opts=None, checkpoint=None):
    """Homotopy continuation to t = 1; never raises on solver failure.

    Returns (state, report). On failure the report carries the trace and
    the best state reached; ``checkpoint(state, t)`` is called after each
    converged stage when given.
    """
    opts = opts or SolveOptions()
    if abs(ap.M - mp.M) > 1e-12 * max(1.0, mp.M):
        raise ValueError("ApproxParams.M disagrees with ModelParams.M")
    t0 = time.perf_counter()
    report = FixedPointReport()
    report.notes.append(
        "rho is re-evaluated as S(v) after each damped velocity update, so "
        "rho = S(v) holds for the converged v"
    )
    state = initial.copy()
    state.validate(g)

    worklist = list(schedule.t_steps)
    t_prev = None
    alpha_floor = schedule.alpha / 64.0
    while worklist:
        t = worklist[0]
        alpha = schedule.alpha
        stage_done = False
        while not stage_done:
            record = StageRecord(t=t, alpha=alpha)
            try:
                state_new = _run_stage(state, t, alpha, schedule, mp, ap, K, g, opts, record)
                report.stages.append(record)
                state = state_new
                stage_done = True
            except NSF2DError as exc:
                record.failures.append(str(exc))
                report.stages.append(record)
                if alpha / 2.0 >= alpha_floor:
                    alpha /= 2.0
                    continue
                # halve the t-step measured from the last converged stage
                base = t_prev if t_prev is not None else 0.0
                if (t - base) <= schedule.t_floor:
                    report.success = False
                    report.final_residuals = coupled_residuals(state, t, mp, ap, K, g, opts)
                    report.wall_time = time.perf_counter() - t0
                    report.notes.append(
                        f"gave up at t={t:g}: t-step at floor {schedule.t_floor:g}"
                    )
                    return state, report
                worklist.insert(0, 0.5 * (base + t))
                stage_done = True  # re-enter with the midpoint stage
        if worklist and worklist[0] == t:
            worklist.pop(0)
            t_prev = t
            if checkpoint is not None and record.converged:
                checkpoint(state, t)

    report.success = all(s.converged for s in report.stages if not s.failures) and any(
        s.converged and s.t == 1.0 for s in report.stages
    )
    report.final_residuals = coupled_residuals(state, 1.0, mp, ap, K, g, opts)
    report.wall_time = time.perf_counter() - t0
    return state, report
