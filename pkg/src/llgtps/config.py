"""Run configuration: INI or JSON files, flat `section.key` names, strict validation."""
import configparser
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    pass


def _vec3(s):
    if isinstance(s, (list, tuple)):
        vals = [float(x) for x in s]
    else:
        vals = [float(x) for x in str(s).replace("(", "").replace(")", "").replace(",", " ").split()]
    if len(vals) != 3:
        raise ValueError("expected three numbers")
    return tuple(vals)


def _bool(s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*options):
    def parse(s):
        s = str(s).strip()
        if s not in options:
            raise ValueError("expected one of %s" % ", ".join(options))
        return s
    return parse


def _opt(parse):
    def inner(s):
        if s is None or str(s).strip().lower() in ("", "none"):
            return None
        return parse(s)
    return inner


@dataclass
class MeshSection:
    lo: tuple = (0.0, 0.0, 0.0)
    hi: tuple = (1.0, 1.0, 1.0)
    n: int = 4
    inner_lo: tuple = None
    inner_hi: tuple = None
    inner_cells: int = None


@dataclass
class SchemeSection:
    alpha: float = 1.0
    lex2: float = 1.0
    k: float = 1e-2
    T: float = 1.0
    variant: str = "TPS2"
    strategy: str = "AB"
    rho: str = "canonical"
    rho_delta: float = 1.0
    M: str = "canonical"
    M_value: float = None
    fixpoint_tol: float = 1e-10
    fixpoint_max_iter: int = 100
    first_step_fi: bool = True


@dataclass
class SolverSection:
    tol: float = 1e-12
    max_iter: int = 2000
    restart: int = 50
    jacobi: bool = False


@dataclass
class PiSection:
    kind: str = "zero"
    c_K: float = 0.0
    axis: tuple = (0.0, 0.0, 1.0)


@dataclass
class TorqueSection:
    kind: str = "zero"
    p: tuple = (0.0, 0.0, 1.0)
    P: float = 0.8
    prefactor: float = None
    u: tuple = (1.0, 0.0, 0.0)
    beta: float = 0.05


@dataclass
class AppliedSection:
    kind: str = "constant"
    value: tuple = (0.0, 0.0, 0.0)
    direction: tuple = (1.0, 0.0, 0.0)
    time_scale: float = 1.0
    amplitude: float = 1.0


@dataclass
class InitialSection:
    m0: str = "uniform"
    direction: tuple = (1.0, 0.0, 0.0)
    seed: int = 0
    amplitude: float = 0.5
    h0: str = "zero"


@dataclass
class EllgSection:
    enabled: bool = False
    mu0: float = 1.0
    sigma_inner: float = 100.0
    sigma_outer: float = 1.0
    coupling: str = "DC2"
    relax_T: float = 0.0
    relax_k: float = 2 ** -8


@dataclass
class OutputSection:
    dir: str = "out"
    every: int = 1
    vtk_every: int = 0


@dataclass
class RunConfig:
    mesh: MeshSection = field(default_factory=MeshSection)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    solver: SolverSection = field(default_factory=SolverSection)
    pi: PiSection = field(default_factory=PiSection)
    torque: TorqueSection = field(default_factory=TorqueSection)
    applied: AppliedSection = field(default_factory=AppliedSection)
    initial: InitialSection = field(default_factory=InitialSection)
    ellg: EllgSection = field(default_factory=EllgSection)
    output: OutputSection = field(default_factory=OutputSection)


# key name -> (section attribute, field name, parser)
KEYS = {
    "mesh.lo": _vec3, "mesh.hi": _vec3, "mesh.n": int,
    "mesh.inner_lo": _opt(_vec3), "mesh.inner_hi": _opt(_vec3), "mesh.inner_cells": _opt(int),
    "scheme.alpha": float, "scheme.lex2": float, "scheme.k": float, "scheme.T": float,
    "scheme.variant": _choice("TPS1", "TPS2"), "scheme.strategy": _choice("FI", "AB", "EE"),
    "scheme.rho": _choice("canonical", "power", "zero"), "scheme.rho_delta": float,
    "scheme.M": _choice("canonical", "constant"), "scheme.M_value": _opt(float),
    "scheme.fixpoint_tol": float, "scheme.fixpoint_max_iter": int, "scheme.first_step_fi": _bool,
    "solver.tol": float, "solver.max_iter": int, "solver.restart": int, "solver.jacobi": _bool,
    "pi.kind": _choice("zero", "anisotropy"), "pi.c_K": float, "pi.axis": _vec3,
    "torque.kind": _choice("zero", "slonczewski", "zhangli"), "torque.p": _vec3,
    "torque.P": float, "torque.prefactor": _opt(float), "torque.u": _vec3, "torque.beta": float,
    "applied.kind": _choice("constant", "ramp"), "applied.value": _vec3,
    "applied.direction": _vec3, "applied.time_scale": float, "applied.amplitude": float,
    "initial.m0": _choice("uniform", "random", "perturbed"), "initial.direction": _vec3,
    "initial.seed": int, "initial.amplitude": float, "initial.h0": _choice("zero", "minus_m"),
    "ellg.enabled": _bool, "ellg.mu0": float, "ellg.sigma.inner": float, "ellg.sigma.outer": float,
    "ellg.coupling": _choice("FC", "DC2", "DC1", "SF"), "ellg.relax_T": float, "ellg.relax_k": float,
    "output.dir": str, "output.every": int, "output.vtk_every": int,
}


def _attr(key):
    section, name = key.split(".", 1)
    return section, name.replace(".", "_")


def apply_settings(cfg, settings):
    """Return a copy of cfg with flat `section.key` settings applied (strings or values)."""
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    updates = {}
    for key, raw in settings.items():
        if key not in KEYS:
            raise ConfigError("unknown configuration key %r" % key)
        try:
            val = KEYS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad value for %r: %s" % (key, exc)) from None
        sec, name = _attr(key)
        updates.setdefault(sec, {})[name] = val
    for sec, vals in updates.items():
        sections[sec] = replace(sections[sec], **vals)
    out = RunConfig(**sections)
    validate(out)
    return out


def validate(cfg):
    """Cheap structural checks; numeric guards run again when the scheme is built."""
    if cfg.mesh.n < 1:
        raise ConfigError("mesh.n must be >= 1")
    if any(h <= l for l, h in zip(cfg.mesh.lo, cfg.mesh.hi)):
        raise ConfigError("mesh.hi must exceed mesh.lo")
    if (cfg.mesh.inner_lo is None) != (cfg.mesh.inner_hi is None):
        raise ConfigError("mesh.inner_lo and mesh.inner_hi must be given together")
    if cfg.ellg.enabled and cfg.mesh.inner_lo is None:
        raise ConfigError("ellg.enabled needs mesh.inner_lo / mesh.inner_hi")
    if cfg.output.every < 1:
        raise ConfigError("output.every must be >= 1")
    if cfg.ellg.sigma_inner <= 0 or cfg.ellg.sigma_outer <= 0:
        raise ConfigError("ellg.sigma.inner and ellg.sigma.outer must be positive")
    if cfg.ellg.mu0 <= 0:
        raise ConfigError("ellg.mu0 must be positive")
    from .app import scheme_config  # deferred: app imports this module
    try:
        scheme_config(cfg)
    except ValueError as exc:
        raise ConfigError("scheme section rejected: %s" % exc) from None


def parse_text(text, fmt="ini"):
    """Flat settings dict from INI or JSON text."""
    if fmt == "json":
        data = json.loads(text)
        flat = {}
        for sec, vals in data.items():
            if not isinstance(vals, dict):
                raise ConfigError("JSON section %r must be an object" % sec)
            for k, v in vals.items():
                flat["%s.%s" % (sec, k)] = v
        return flat
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep case (scheme.T, scheme.M)
    cp.read_string(text)
    return {"%s.%s" % (sec, k): v for sec in cp.sections() for k, v in cp[sec].items()}


def load_config(path=None, overrides=(), base=None):
    """RunConfig from a file (INI or .json), a base config and `key=value` overrides."""
    cfg = base or RunConfig()
    if path is not None:
        p = Path(path)
        fmt = "json" if p.suffix.lower() == ".json" else "ini"
        try:
            settings = parse_text(p.read_text(), fmt)
        except (configparser.Error, json.JSONDecodeError) as exc:
            raise ConfigError("cannot parse %s: %s" % (p, exc)) from None
        cfg = apply_settings(cfg, settings)
    return apply_settings(cfg, parse_overrides(overrides))


def parse_overrides(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError("override %r is not of the form key=value" % item)
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def to_ini(cfg):
    """Render a RunConfig back to INI text (round-trips through load_config)."""
    lines = []
    for sec_f in fields(cfg):
        sec = getattr(cfg, sec_f.name)
        lines.append("[%s]" % sec_f.name)
        for f in fields(sec):
            v = getattr(sec, f.name)
            key = f.name
            if sec_f.name == "ellg" and key.startswith("sigma_"):
                key = key.replace("_", ".", 1)
            if v is None:
                v = "none"
            elif isinstance(v, tuple):
                v = ", ".join(repr(float(x)) for x in v)
            lines.append("%s = %s" % (key, v))
        lines.append("")
    return "\n".join(lines)
