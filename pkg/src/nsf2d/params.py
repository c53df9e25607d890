"""Model and approximation parameters plus the admissibility validator.

The validator evaluates every inequality the existence theory needs and
reports the computed thresholds; strict mode requires the full exponent
set, exploratory mode downgrades the exponent conditions to warnings (the
discrete solver stays well posed for milder exponents).
"""

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, DomainError


# -- analytic presets (no expression parser by design) -----------------------


@dataclass(frozen=True)
class ScalarPreset:
    """Scalar data preset: constant / fourier1 / gaussian_bump."""

    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    kx: int = 1
    ky: int = 1
    x0: float = 0.5
    y0: float = 0.5
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("constant", "fourier1", "gaussian_bump"):
            raise ConfigError(f"unknown scalar preset {self.kind!r}")

    def eval(self, x, y, Lx=1.0, Ly=1.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, self.value)
        if self.kind == "fourier1":
            return self.value + self.amplitude * np.cos(
                2.0 * np.pi * self.kx * x / Lx
            ) * np.cos(2.0 * np.pi * self.ky * y / Ly)
        r2 = (x - self.x0) ** 2 + (y - self.y0) ** 2
        return self.value + self.amplitude * np.exp(-r2 / (2.0 * self.sigma ** 2))

    def bounds(self):
        """Conservative (lo, hi) enclosure of the preset's range."""
        if self.kind == "constant":
            return self.value, self.value
        if self.kind == "fourier1":
            return self.value - abs(self.amplitude), self.value + abs(self.amplitude)
        lo = min(self.value, self.value + self.amplitude)
        hi = max(self.value, self.value + self.amplitude)
        return lo, hi


@dataclass(frozen=True)
class VectorPreset:
    """Vector data preset for the body force; one cosine mode or constant."""

    kind: str = "constant"
    fx: float = 0.0
    fy: float = 0.0
    kx: int = 1
    ky: int = 1
    x0: float = 0.5
    y0: float = 0.5
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("constant", "fourier1", "gaussian_bump"):
            raise ConfigError(f"unknown vector preset {self.kind!r}")

    def eval(self, x, y, Lx=1.0, Ly=1.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        if self.kind == "constant":
            return np.full(shape, self.fx), np.full(shape, self.fy)
        if self.kind == "fourier1":
            mode = np.cos(2.0 * np.pi * self.kx * x / Lx) * np.cos(
                2.0 * np.pi * self.ky * y / Ly
            )
            return self.fx * mode, self.fy * mode
        bump = np.exp(-((x - self.x0) ** 2 + (y - self.y0) ** 2) / (2.0 * self.sigma ** 2))
        return self.fx * bump, self.fy * bump

    def sup_norm(self):
        return math.hypot(self.fx, self.fy)


# -- parameter records --------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Physical constants, constitutive exponents, boundary data, force."""

    gamma: float = 4.0
    m: float = 2.5
    l: float = 1.5
    mu: float = 1.0
    lam: float = 0.0
    f: float = 0.1
    a1: float = 1.0
    a2: float = 1.0
    a3: float = 1.0
    a4: float = 1.0
    M: float = 1.0
    theta0: ScalarPreset = ScalarPreset("constant", value=1.0)
    F: VectorPreset = VectorPreset("constant", fx=0.0, fy=0.0)


@dataclass(frozen=True)
class ApproxParams:
    """Regularization, truncation and homotopy knobs.

    h = M/|Omega| is derived and read-only; the rest state must sit below
    the truncation threshold (h < k).
    """

    epsilon: float
    k: float
    t: float = 1.0
    M: float = 1.0
    area: float = 1.0

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise DomainError("epsilon must be positive")
        if not (self.k > 0.0):
            raise DomainError("k must be positive")
        if not (0.0 <= self.t <= 1.0):
            raise DomainError("homotopy parameter t must lie in [0, 1]")
        if not (self.M > 0.0 and self.area > 0.0):
            raise DomainError("M and area must be positive")
        if not (self.h < self.k):
            raise DomainError(
                f"mean density h = {self.h:g} must lie below the truncation threshold k = {self.k:g}"
            )

    @property
    def h(self):
        return self.M / self.area

    def with_t(self, t):
        return ApproxParams(self.epsilon, self.k, t, self.M, self.area)


# -- validation ----------------------------------------------------------------


def threshold_m(gamma):
    """Conductivity-exponent threshold (3*gamma - 1)/(3*gamma - 7)."""
    if not (gamma > 7.0 / 3.0):
        raise DomainError("threshold_m requires gamma > 7/3")
    return (3.0 * gamma - 1.0) / (3.0 * gamma - 7.0)


@dataclass(frozen=True)
class Condition:
    name: str
    description: str
    threshold: float
    value: float
    satisfied: bool
    category: str  # "physical" | "exponent" | "info"


@dataclass(frozen=True)
class ValidationReport:
    strict: bool
    conditions: tuple
    notes: tuple

    @property
    def ok(self):
        for c in self.conditions:
            if c.category == "physical" and not c.satisfied:
                return False
            if self.strict and c.category == "exponent" and not c.satisfied:
                return False
        return True

    def failures(self):
        return [c for c in self.conditions if not c.satisfied]

    def to_lines(self):
        lines = [f"mode: {'strict' if self.strict else 'exploratory'}"]
        for c in self.conditions:
            status = "ok" if c.satisfied else ("VIOLATED" if self.strict or c.category == "physical" else "warning")
            lines.append(
                f"{status:9s} {c.name}: {c.description} "
                f"(value {c.value:.6g}, threshold {c.threshold:.6g})"
            )
        for n in self.notes:
            lines.append(f"note      {n}")
        lines.append(f"overall: {'pass' if self.ok else 'fail'}")
        return lines


def _finite(name, value):
    if not np.isfinite(value):
        raise ConfigError(f"non-finite parameter field: {name}")


def validate_params(p, strict=True):
    """Evaluate every admissibility condition; pure, never mutates input."""
    for fld in fields(p):
        val = getattr(p, fld.name)
        if isinstance(val, (int, float)):
            _finite(fld.name, val)
    for preset_name in ("theta0", "F"):
        preset = getattr(p, preset_name)
        for fld in fields(preset):
            val = getattr(preset, fld.name)
            if isinstance(val, (int, float)) and not isinstance(val, str):
                _finite(f"{preset_name}.{fld.name}", val)

    conds = []

    def add(name, desc, threshold, value, satisfied, category):
        conds.append(Condition(name, desc, float(threshold), float(value), bool(satisfied), category))

    add("gamma_gt_3", "gamma > 3", 3.0, p.gamma, p.gamma > 3.0, "exponent")
    if p.gamma > 7.0 / 3.0:
        thr = threshold_m(p.gamma)
        add("m_main", "m > (3g-1)/(3g-7)", thr, p.m, p.m > thr, "exponent")
    else:
        add("m_main", "m > (3g-1)/(3g-7) (formula outside domain)", float("nan"), p.m, False, "exponent")
    add("m_eq_l_plus_1", "m = l + 1", p.l + 1.0, p.m, abs(p.m - (p.l + 1.0)) <= 1e-12, "exponent")
    add("m_aux_1", "m > 2/3", 2.0 / 3.0, p.m, p.m > 2.0 / 3.0, "exponent")
    if p.gamma > 1.0:
        add(
            "m_aux_2",
            "m > 2g/(3(g-1))",
            2.0 * p.gamma / (3.0 * (p.gamma - 1.0)),
            p.m,
            p.m > 2.0 * p.gamma / (3.0 * (p.gamma - 1.0)),
            "exponent",
        )
        add(
            "m_aux_3",
            "m > (3g-1)/(6g-6)",
            (3.0 * p.gamma - 1.0) / (6.0 * p.gamma - 6.0),
            p.m,
            p.m > (3.0 * p.gamma - 1.0) / (6.0 * p.gamma - 6.0),
            "exponent",
        )
    add("mu_positive", "mu > 0", 0.0, p.mu, p.mu > 0.0, "physical")
    add(
        "bulk_viscosity",
        "lambda + (2/3) mu > 0",
        0.0,
        p.lam + (2.0 / 3.0) * p.mu,
        p.lam + (2.0 / 3.0) * p.mu > 0.0,
        "physical",
    )
    add("friction_nonneg", "f >= 0", 0.0, p.f, p.f >= 0.0, "physical")
    add("mass_positive", "M > 0", 0.0, p.M, p.M > 0.0, "physical")
    t_lo, t_hi = p.theta0.bounds()
    add("theta0_positive", "0 < theta0 (pointwise lower bound)", 0.0, t_lo, t_lo > 0.0, "physical")
    add("theta0_bounded", "theta0 < inf (pointwise upper bound)", float("inf"), t_hi, np.isfinite(t_hi), "physical")
    add("force_bounded", "sup |F| < inf", float("inf"), p.F.sup_norm(), np.isfinite(p.F.sup_norm()), "physical")

    notes = []
    if abs(p.m - (p.l + 1.0)) > 1e-12:
        notes.append(f"l = {p.l:g} differs from m - 1 = {p.m - 1.0:g}")
    if p.f == 0.0:
        notes.append(
            "f = 0 (perfect slip): admissible here because the rectangular "
            "domain is not rotationally symmetric"
        )
    return ValidationReport(strict=strict, conditions=tuple(conds), notes=tuple(notes))
