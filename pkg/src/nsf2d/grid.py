"""2D staggered (MAC) grid on a rectangle with discrete calculus.

Layout conventions used everywhere in the package:

* scalars on cell centers, shape ``(nx, ny)``, center ``((i+1/2)hx, (j+1/2)hy)``
* x-velocity u on vertical faces, shape ``(nx+1, ny)`` at ``(i hx, (j+1/2)hy)``
* y-velocity v on horizontal faces, shape ``(nx, ny+1)`` at ``((i+1/2)hx, j hy)``
* node scalars (stream function, shear) shape ``(nx+1, ny+1)`` at ``(i hx, j hy)``

u[0], u[nx], v[:,0], v[:,ny] are the boundary faces; impermeability means
those entries are zero. Ghost values for each solver's boundary condition
are documented where they are built, not here.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .reporting import fmt_num

CELLS = "cells"
UFACES = "ufaces"
VFACES = "vfaces"
NODES = "nodes"


@dataclass(frozen=True, eq=False)
class Grid:
    Lx: float
    Ly: float
    nx: int
    ny: int
    hx: float = field(init=False)
    hy: float = field(init=False)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need at least 3 cells per direction")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("domain side lengths must be positive")
        object.__setattr__(self, "hx", self.Lx / self.nx)
        object.__setattr__(self, "hy", self.Ly / self.ny)

    # -- coordinates ------------------------------------------------------
    @property
    def xc(self):
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self):
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def xn(self):
        return np.arange(self.nx + 1) * self.hx

    @property
    def yn(self):
        return np.arange(self.ny + 1) * self.hy

    def cell_centers(self):
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def uface_coords(self):
        return np.meshgrid(self.xn, self.yc, indexing="ij")

    def vface_coords(self):
        return np.meshgrid(self.xc, self.yn, indexing="ij")

    @property
    def area(self):
        return self.Lx * self.Ly

    def shape_of(self, loc):
        return {
            CELLS: (self.nx, self.ny),
            UFACES: (self.nx + 1, self.ny),
            VFACES: (self.nx, self.ny + 1),
            NODES: (self.nx + 1, self.ny + 1),
        }[loc]

    def check(self, arr, loc, name="field"):
        arr = np.asarray(arr)
        if arr.shape != self.shape_of(loc):
            raise ShapeError(
                f"{name}: expected {loc} shape {self.shape_of(loc)}, got {arr.shape}"
            )
        return arr

    def boundary_faces(self):
        """All boundary faces as (wall, x, y, normal, tangent, weight)."""
        faces = []
        for i, x in enumerate(self.xc):
            faces.append(("bottom", x, 0.0, (0.0, -1.0), (1.0, 0.0), self.hx))
            faces.append(("top", x, self.Ly, (0.0, 1.0), (-1.0, 0.0), self.hx))
        for j, y in enumerate(self.yc):
            faces.append(("left", 0.0, y, (-1.0, 0.0), (0.0, -1.0), self.hy))
            faces.append(("right", self.Lx, y, (1.0, 0.0), (0.0, 1.0), self.hy))
        return faces


@dataclass
class VectorField:
    """Face-centered velocity carrier; u and v as in the module docstring."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, g):
        return cls(np.zeros((g.nx + 1, g.ny)), np.zeros((g.nx, g.ny + 1)))

    def copy(self):
        return VectorField(self.u.copy(), self.v.copy())

    def boundary_normal_max(self):
        return max(
            float(np.max(np.abs(self.u[0, :]))),
            float(np.max(np.abs(self.u[-1, :]))),
            float(np.max(np.abs(self.v[:, 0]))),
            float(np.max(np.abs(self.v[:, -1]))),
        )


@dataclass
class TensorField:
    """Symmetric 2x2 tensor: diagonal on cells, off-diagonal on nodes."""

    t11: np.ndarray
    t22: np.ndarray
    t12: np.ndarray


@dataclass
class BoundaryField:
    """Scalar trace on boundary face midpoints, one array per wall."""

    bottom: np.ndarray
    top: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @classmethod
    def constant(cls, g, value):
        return cls(
            np.full(g.nx, float(value)),
            np.full(g.nx, float(value)),
            np.full(g.ny, float(value)),
            np.full(g.ny, float(value)),
        )

    def map(self, fn):
        return BoundaryField(fn(self.bottom), fn(self.top), fn(self.left), fn(self.right))


# -- differential operators ------------------------------------------------


def grad(g, s):
    """Cell scalar -> face vector; boundary faces get 0 (zero-flux ghost)."""
    s = g.check(s, CELLS, "grad input")
    gu = np.zeros((g.nx + 1, g.ny))
    gv = np.zeros((g.nx, g.ny + 1))
    gu[1:-1, :] = (s[1:, :] - s[:-1, :]) / g.hx
    gv[:, 1:-1] = (s[:, 1:] - s[:, :-1]) / g.hy
    return VectorField(gu, gv)


def div(g, vf):
    u = g.check(vf.u, UFACES, "div u")
    v = g.check(vf.v, VFACES, "div v")
    return (u[1:, :] - u[:-1, :]) / g.hx + (v[:, 1:] - v[:, :-1]) / g.hy


def laplace(g, s):
    """div(grad s) with mirror (zero normal flux) ghosts; exactly div∘grad."""
    return div(g, grad(g, s))


def _dudy_nodes(g, u):
    """du/dy on all nodes: centered inside, one-sided 2nd order at walls."""
    out = np.zeros((g.nx + 1, g.ny + 1))
    out[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / g.hy
    out[:, 0] = (-2.0 * u[:, 0] + 3.0 * u[:, 1] - u[:, 2]) / g.hy
    out[:, -1] = (2.0 * u[:, -1] - 3.0 * u[:, -2] + u[:, -3]) / g.hy
    return out


def _dvdx_nodes(g, v):
    out = np.zeros((g.nx + 1, g.ny + 1))
    out[1:-1, :] = (v[1:, :] - v[:-1, :]) / g.hx
    out[0, :] = (-2.0 * v[0, :] + 3.0 * v[1, :] - v[2, :]) / g.hx
    out[-1, :] = (2.0 * v[-1, :] - 3.0 * v[-2, :] + v[-3, :]) / g.hx
    return out


def sym_grad(g, vf):
    """D(v) = (grad v + grad v^T)/2; diagonal on cells, shear on nodes."""
    u = g.check(vf.u, UFACES, "sym_grad u")
    v = g.check(vf.v, VFACES, "sym_grad v")
    d11 = (u[1:, :] - u[:-1, :]) / g.hx
    d22 = (v[:, 1:] - v[:, :-1]) / g.hy
    d12 = 0.5 * (_dudy_nodes(g, u) + _dvdx_nodes(g, v))
    return TensorField(d11, d22, d12)


def stress(g, vf, mu, lam):
    """S(v) = 2 mu D(v) + lam (div v) I on the same staggering as sym_grad."""
    d = sym_grad(g, vf)
    dv = d.t11 + d.t22
    return TensorField(
        2.0 * mu * d.t11 + lam * dv,
        2.0 * mu * d.t22 + lam * dv,
        2.0 * mu * d.t12,
    )


# -- quadrature -------------------------------------------------------------


def integrate(g, s):
    s = g.check(s, CELLS, "integrate")
    return float(np.sum(s)) * g.hx * g.hy


def boundary_integrate(g, bf):
    return float(
        (np.sum(bf.bottom) + np.sum(bf.top)) * g.hx
        + (np.sum(bf.left) + np.sum(bf.right)) * g.hy
    )


def node_weights(g):
    """Quadrature weights for node-based quantities (corner 1/4, edge 1/2)."""
    w = np.full((g.nx + 1, g.ny + 1), g.hx * g.hy)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


def dot_cells(g, a, b):
    return float(np.sum(a * b)) * g.hx * g.hy


def dot_faces(g, vf1, vf2):
    """Face inner product with half weights on boundary faces."""
    wu = np.ones((g.nx + 1, g.ny))
    wu[0, :] = 0.5
    wu[-1, :] = 0.5
    wv = np.ones((g.nx, g.ny + 1))
    wv[:, 0] = 0.5
    wv[:, -1] = 0.5
    return float(np.sum(wu * vf1.u * vf2.u) + np.sum(wv * vf1.v * vf2.v)) * g.hx * g.hy


# -- interpolation helpers ---------------------------------------------------


def u_at_cells(g, u):
    return 0.5 * (u[:-1, :] + u[1:, :])


def v_at_cells(g, v):
    return 0.5 * (v[:, :-1] + v[:, 1:])


def cells_to_ufaces(g, c):
    """Cell scalar averaged to u-faces; boundary faces copy the cell value."""
    out = np.empty((g.nx + 1, g.ny))
    out[1:-1, :] = 0.5 * (c[1:, :] + c[:-1, :])
    out[0, :] = c[0, :]
    out[-1, :] = c[-1, :]
    return out


def cells_to_vfaces(g, c):
    out = np.empty((g.nx, g.ny + 1))
    out[:, 1:-1] = 0.5 * (c[:, 1:] + c[:, :-1])
    out[:, 0] = c[:, 0]
    out[:, -1] = c[:, -1]
    return out


def cells_to_nodes(g, c):
    """Cell scalar averaged to nodes (2-cell average on walls, 1 at corners)."""
    out = np.zeros((g.nx + 1, g.ny + 1))
    cnt = np.zeros((g.nx + 1, g.ny + 1))
    for di in (0, 1):
        for dj in (0, 1):
            out[di : g.nx + di, dj : g.ny + dj] += c
            cnt[di : g.nx + di, dj : g.ny + dj] += 1.0
    return out / cnt


def cell_gradients(g, s):
    """(ds/dx, ds/dy) at cell centers; one-sided 2nd order at boundary cells."""
    dx = np.empty_like(s)
    dy = np.empty_like(s)
    dx[1:-1, :] = (s[2:, :] - s[:-2, :]) / (2.0 * g.hx)
    dx[0, :] = (-3.0 * s[0, :] + 4.0 * s[1, :] - s[2, :]) / (2.0 * g.hx)
    dx[-1, :] = (3.0 * s[-1, :] - 4.0 * s[-2, :] + s[-3, :]) / (2.0 * g.hx)
    dy[:, 1:-1] = (s[:, 2:] - s[:, :-2]) / (2.0 * g.hy)
    dy[:, 0] = (-3.0 * s[:, 0] + 4.0 * s[:, 1] - s[:, 2]) / (2.0 * g.hy)
    dy[:, -1] = (3.0 * s[:, -1] - 4.0 * s[:, -2] + s[:, -3]) / (2.0 * g.hy)
    return dx, dy


def boundary_trace(g, s):
    """Second-order one-sided trace of a cell scalar on boundary midpoints."""
    return BoundaryField(
        1.5 * s[:, 0] - 0.5 * s[:, 1],
        1.5 * s[:, -1] - 0.5 * s[:, -2],
        1.5 * s[0, :] - 0.5 * s[1, :],
        1.5 * s[-1, :] - 0.5 * s[-2, :],
    )


# -- serialization -----------------------------------------------------------

_LOC_COORDS = {
    CELLS: lambda g: g.cell_centers(),
    UFACES: lambda g: g.uface_coords(),
    VFACES: lambda g: g.vface_coords(),
    NODES: lambda g: np.meshgrid(g.xn, g.yn, indexing="ij"),
}


def field_to_csv(g, arr, path, loc=CELLS):
    """One row per entry: i, j, x, y, value (full precision)."""
    arr = g.check(arr, loc, "field_to_csv")
    X, Y = _LOC_COORDS[loc](g)
    lines = ["i,j,x,y,value"]
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            lines.append(
                f"{i},{j},{fmt_num(X[i, j])},{fmt_num(Y[i, j])},{fmt_num(arr[i, j])}"
            )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_field_blocks(path, g, fields):
    """Restart format: hex floats, bit-exact round-trip.

    fields maps name -> (loc, array).
    """
    lines = ["nsf2d-fields 1"]
    lines.append(
        f"grid {float(g.Lx).hex()} {float(g.Ly).hex()} {g.nx} {g.ny}"
    )
    for name, (loc, arr) in fields.items():
        arr = g.check(arr, loc, name)
        lines.append(f"field {name} {loc} {arr.shape[0]} {arr.shape[1]}")
        for val in arr.ravel():
            lines.append(float(val).hex())
        lines.append("end")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_blocks(path):
    """Inverse of write_field_blocks; returns (Grid, {name: (loc, array)})."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split() != ["nsf2d-fields", "1"]:
        raise ValueError(f"{path}: not a field-block file")
    tok = lines[1].split()
    if tok[0] != "grid":
        raise ValueError(f"{path}: missing grid header")
    g = Grid(float.fromhex(tok[1]), float.fromhex(tok[2]), int(tok[3]), int(tok[4]))
    fields = {}
    pos = 2
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        tok = lines[pos].split()
        if tok[0] != "field":
            raise ValueError(f"{path}: expected field header at line {pos + 1}")
        name, loc, n0, n1 = tok[1], tok[2], int(tok[3]), int(tok[4])
        vals = [float.fromhex(lines[pos + 1 + q]) for q in range(n0 * n1)]
        if lines[pos + 1 + n0 * n1] != "end":
            raise ValueError(f"{path}: missing end marker for field {name}")
        fields[name] = (loc, np.array(vals).reshape(n0, n1))
        pos += n0 * n1 + 2
    return g, fields
