"""Run configuration: flat sectioned key-value text files.

Sections: [model], [approx], [grid], [solver], [output]. Presets for the
force and boundary temperature are named with numeric parameters; there is
deliberately no expression parser. ``configs/schema.ini`` in the repository
documents every key.
"""

import configparser
import io
from dataclasses import dataclass, field

from .constitutive import TruncationK
from .errors import ConfigError
from .fixedpoint import ContinuationSchedule
from .grid import Grid
from .params import ApproxParams, ModelParams, ScalarPreset, VectorPreset
from .reporting import fmt_num
from .subsolvers import SolveOptions

_SCALAR_PRESET_KEYS = ("value", "amplitude", "kx", "ky", "x0", "y0", "sigma")
_VECTOR_PRESET_KEYS = ("fx", "fy", "kx", "ky", "x0", "y0", "sigma")


@dataclass
class RunConfig:
    model: ModelParams
    epsilon: float
    k: float
    eta: float | None
    Lx: float
    Ly: float
    nx: int
    ny: int
    schedule: ContinuationSchedule
    options: SolveOptions
    strict: bool = True
    output_dir: str = "out"
    dump_fields: bool = False
    initial_state: str | None = None
    sweep_epsilon: tuple = ()
    sweep_k: tuple = ()

    def grid(self):
        return Grid(self.Lx, self.Ly, self.nx, self.ny)

    def approx(self, epsilon=None, k=None):
        g = self.grid()
        return ApproxParams(
            epsilon if epsilon is not None else self.epsilon,
            k if k is not None else self.k,
            1.0,
            self.model.M,
            g.area,
        )

    def truncation(self, k=None):
        return TruncationK(
            k=k if k is not None else self.k,
            gamma=self.model.gamma,
            a1=self.model.a1,
            a2=self.model.a2,
        )


class _Section:
    def __init__(self, parser, name):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")
        self.name = name
        self.sec = parser[name]

    def _get(self, key, cast, required, default):
        if key not in self.sec:
            if required:
                raise ConfigError(f"[{self.name}] missing key '{key}'")
            return default
        raw = self.sec[key]
        try:
            return cast(raw)
        except (ValueError, TypeError):
            raise ConfigError(
                f"[{self.name}] {key}: cannot parse {raw!r}"
            ) from None

    def num(self, key, required=True, default=None):
        return self._get(key, float, required, default)

    def integer(self, key, required=True, default=None):
        return self._get(key, int, required, default)

    def text(self, key, required=True, default=None):
        return self._get(key, str, required, default)

    def flag(self, key, required=True, default=None):
        def cast(raw):
            r = raw.strip().lower()
            if r in ("true", "yes", "1", "on"):
                return True
            if r in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)

        return self._get(key, cast, required, default)

    def numlist(self, key, required=True, default=()):
        def cast(raw):
            return tuple(float(v) for v in raw.split(",") if v.strip())

        return self._get(key, cast, required, default)


def _scalar_preset(sec, prefix):
    kind = sec.text(f"{prefix}.preset")
    kwargs = {"kind": kind}
    for key in _SCALAR_PRESET_KEYS:
        full = f"{prefix}.{key}"
        if full in sec.sec:
            caster = sec.integer if key in ("kx", "ky") else sec.num
            kwargs[key] = caster(full)
    try:
        return ScalarPreset(**kwargs)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(f"[{sec.name}] {prefix}: {exc}") from None


def _vector_preset(sec, prefix):
    kind = sec.text(f"{prefix}.preset")
    kwargs = {"kind": kind}
    for key in _VECTOR_PRESET_KEYS:
        full = f"{prefix}.{key}"
        if full in sec.sec:
            caster = sec.integer if key in ("kx", "ky") else sec.num
            kwargs[key] = caster(full)
    try:
        return VectorPreset(**kwargs)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(f"[{sec.name}] {prefix}: {exc}") from None


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (M vs m, Lx)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    model_s = _Section(parser, "model")
    approx_s = _Section(parser, "approx")
    grid_s = _Section(parser, "grid")
    solver_s = _Section(parser, "solver")
    out_s = _Section(parser, "output")

    model = ModelParams(
        gamma=model_s.num("gamma"),
        m=model_s.num("m"),
        l=model_s.num("l"),
        mu=model_s.num("mu"),
        lam=model_s.num("lambda"),
        f=model_s.num("f"),
        a1=model_s.num("a1", required=False, default=1.0),
        a2=model_s.num("a2", required=False, default=1.0),
        a3=model_s.num("a3", required=False, default=1.0),
        a4=model_s.num("a4", required=False, default=1.0),
        M=model_s.num("M"),
        theta0=_scalar_preset(model_s, "theta0"),
        F=_vector_preset(model_s, "force"),
    )
    try:
        schedule = ContinuationSchedule(
            t_steps=solver_s.numlist("t_steps", required=False,
                                     default=(0.0, 0.25, 0.5, 0.75, 1.0)),
            alpha=solver_s.num("alpha", required=False, default=0.5),
            stage_tol=solver_s.num("stage_tol", required=False, default=1e-9),
            max_outer=solver_s.integer("max_outer", required=False, default=200),
            t_floor=solver_s.num("t_floor", required=False, default=1.0 / 64.0),
            anderson_window=solver_s.integer("anderson_window", required=False, default=8),
        )
        options = SolveOptions(
            newton_tol=solver_s.num("newton_tol", required=False, default=1e-11),
            max_iter=solver_s.integer("max_iter", required=False, default=60),
            picard_damping=solver_s.num("picard_damping", required=False, default=1.0),
            linear_solver_tol=solver_s.num("linear_solver_tol", required=False, default=1e-10),
            continuity_method=solver_s.text("continuity_method", required=False, default="picard"),
        )
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None

    return RunConfig(
        model=model,
        epsilon=approx_s.num("epsilon"),
        k=approx_s.num("k"),
        eta=approx_s.num("eta", required=False, default=None),
        Lx=grid_s.num("Lx"),
        Ly=grid_s.num("Ly"),
        nx=grid_s.integer("nx"),
        ny=grid_s.integer("ny"),
        schedule=schedule,
        options=options,
        strict=solver_s.text("mode", required=False, default="strict") == "strict",
        output_dir=out_s.text("directory", required=False, default="out"),
        dump_fields=out_s.flag("dump_fields", required=False, default=False),
        initial_state=out_s.text("initial_state", required=False, default=None),
        sweep_epsilon=out_s.numlist("sweep.epsilon", required=False, default=()),
        sweep_k=out_s.numlist("sweep.k", required=False, default=()),
    )


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def serialize_config(cfg):
    """Inverse of parse_config up to formatting; parse(serialize(c)) == c."""
    p = configparser.ConfigParser(interpolation=None)
    p.optionxform = str
    m = cfg.model

    def put(section, key, value):
        if not p.has_section(section):
            p.add_section(section)
        if isinstance(value, bool):
            p[section][key] = "true" if value else "false"
        elif isinstance(value, int):
            p[section][key] = str(value)
        elif isinstance(value, float):
            p[section][key] = fmt_num(value)
        else:
            p[section][key] = str(value)

    for key, val in (
        ("gamma", m.gamma), ("m", m.m), ("l", m.l), ("mu", m.mu),
        ("lambda", m.lam), ("f", m.f), ("a1", m.a1), ("a2", m.a2),
        ("a3", m.a3), ("a4", m.a4), ("M", m.M),
    ):
        put("model", key, float(val))
    put("model", "theta0.preset", m.theta0.kind)
    for key in _SCALAR_PRESET_KEYS:
        val = getattr(m.theta0, key)
        put("model", f"theta0.{key}", val)
    put("model", "force.preset", m.F.kind)
    for key in _VECTOR_PRESET_KEYS:
        put("model", f"force.{key}", getattr(m.F, key))

    put("approx", "epsilon", float(cfg.epsilon))
    put("approx", "k", float(cfg.k))
    if cfg.eta is not None:
        put("approx", "eta", float(cfg.eta))

    put("grid", "Lx", float(cfg.Lx))
    put("grid", "Ly", float(cfg.Ly))
    put("grid", "nx", int(cfg.nx))
    put("grid", "ny", int(cfg.ny))

    sch = cfg.schedule
    put("solver", "mode", "strict" if cfg.strict else "exploratory")
    put("solver", "t_steps", ",".join(fmt_num(t) for t in sch.t_steps))
    put("solver", "alpha", sch.alpha)
    put("solver", "stage_tol", sch.stage_tol)
    put("solver", "max_outer", sch.max_outer)
    put("solver", "t_floor", sch.t_floor)
    put("solver", "anderson_window", sch.anderson_window)
    opt = cfg.options
    put("solver", "newton_tol", opt.newton_tol)
    put("solver", "max_iter", opt.max_iter)
    put("solver", "picard_damping", opt.picard_damping)
    put("solver", "linear_solver_tol", opt.linear_solver_tol)
    put("solver", "continuity_method", opt.continuity_method)

    put("output", "directory", cfg.output_dir)
    put("output", "dump_fields", cfg.dump_fields)
    if cfg.initial_state is not None:
        put("output", "initial_state", cfg.initial_state)
    if cfg.sweep_epsilon:
        put("output", "sweep.epsilon", ",".join(fmt_num(v) for v in cfg.sweep_epsilon))
    if cfg.sweep_k:
        put("output", "sweep.k", ",".join(fmt_num(v) for v in cfg.sweep_k))

    buf = io.StringIO()
    p.write(buf)
    return buf.getvalue()
