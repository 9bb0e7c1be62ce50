"""Experiment configuration: a small ``[section]`` / ``key = value`` text format.

Example::

    [kinetics]
    beta = 0.5
    alpha = -1.5

    [initial]
    background = origin
    perturbation = semistable
    radius = 2

Fixed-point selectors are ``origin``, ``stable-node``, ``semistable``,
``saddle`` or an explicit ``x, y`` pair.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, fields

from .kinetics import (
    FixedPointKind, KineticParams, PhasePoint, all_fixed_points, snh_alpha,
)
from .rdsolver import GridSpec, InitialCondition, make_grid


class ConfigError(ValueError):
    pass


SECTIONS = {
    "kinetics": ("a", "b", "nu", "beta", "alpha"),
    "grid": ("dimension", "n_sites", "dt", "d_x", "d_y"),
    "initial": ("background", "perturbation", "radius"),
    "run": ("t_end", "sample_stride", "section_only"),
    "sweep": ("sweep_parameter", "sweep_start", "sweep_stop", "sweep_count"),
    "diagnostics": ("floor", "cv_threshold", "margin"),
    "fixed_points": ("trace_threshold", "trace_arclength", "trace_ds"),
    "output": ("out_dir",),
}

SWEEP_PARAMETERS = ("beta", "alpha", "radius")


@dataclass(frozen=True)
class ExperimentConfig:
    a: float = -1.0
    b: float = 1.0
    nu: float = 1.0
    beta: float = 0.5
    alpha: float = -1.5
    dimension: int = 1
    n_sites: int = 2000
    dt: float = 0.01
    d_x: float = 2e-5
    d_y: float = 2e-5
    background: str = "origin"
    perturbation: str = "semistable"
    radius: int = 2
    t_end: float = 100.0
    sample_stride: int = 100
    section_only: bool = True
    sweep_parameter: str = ""
    sweep_start: float = 0.0
    sweep_stop: float = 0.0
    sweep_count: int = 0
    floor: float | None = None
    cv_threshold: float = 0.05
    margin: int | None = None
    trace_threshold: bool = False
    trace_arclength: float = 20.0
    trace_ds: float = 1e-3
    out_dir: str = "out"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # -- resolution -------------------------------------------------------
    def kinetic_params(self) -> KineticParams:
        try:
            return KineticParams(self.a, self.b, self.nu, self.beta, self.alpha)
        except ValueError as exc:
            raise ConfigError(f"[kinetics] {exc}") from exc

    def grid(self) -> GridSpec:
        try:
            return make_grid(self.dimension, self.n_sites, self.dt, self.d_x, self.d_y)
        except ValueError as exc:
            raise ConfigError(f"[grid] {exc}") from exc

    def initial_condition(self) -> InitialCondition:
        k = self.kinetic_params()
        bg = resolve_point(self.background, k, "background")
        pert = resolve_point(self.perturbation, k, "perturbation")
        if self.radius < 0:
            raise ConfigError("[initial] radius: must be >= 0")
        return InitialCondition(bg, pert, self.radius)

    def validate(self) -> None:
        self.kinetic_params()
        self.grid()
        self.initial_condition()
        if not self.t_end > 0:
            raise ConfigError("[run] t_end: must be positive")
        if self.sample_stride < 1:
            raise ConfigError("[run] sample_stride: must be >= 1")
        if self.sweep_parameter and self.sweep_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"[sweep] sweep_parameter: {self.sweep_parameter!r} not one of {SWEEP_PARAMETERS}")

    # -- serialisation ----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            for key in keys:
                value = getattr(self, key)
                if value is None:
                    continue
                lines.append(f"{key} = {_format(value)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind in ("int", "int | None"):
        return int(raw)
    if kind in ("float", "float | None"):
        return float(raw)
    return raw


def parse_config(text: str, base: ExperimentConfig | None = None,
                 source: str = "<config>") -> ExperimentConfig:
    """Parse config text on top of ``base`` (defaults when None)."""
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",),
        delimiters=("=",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    changes = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if _SECTION_OF.get(key) != section:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                changes[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{section}] {key}: {exc}") from exc
    return (base or ExperimentConfig()).replace(**changes)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base, source=str(path))


def resolve_point(selector: str, k: KineticParams, what: str = "point") -> PhasePoint:
    sel = selector.strip().lower()
    if sel == "origin":
        return PhasePoint(0.0, 0.0)
    if "," in sel:
        try:
            x, y = (float(v) for v in sel.split(","))
        except ValueError as exc:
            raise ConfigError(f"[initial] {what}: bad coordinates {selector!r}") from exc
        return PhasePoint(x, y)
    wanted = {
        "stable-node": (FixedPointKind.STABLE_NODE, FixedPointKind.SEMISTABLE),
        "semistable": (FixedPointKind.SEMISTABLE,),
        "saddle": (FixedPointKind.SADDLE,),
    }.get(sel)
    if wanted is None:
        raise ConfigError(f"[initial] {what}: unknown selector {selector!r}")
    for kind in wanted:
        for rep in all_fixed_points(k):
            if rep.kind is kind:
                return rep.location
    raise ConfigError(f"[initial] {what}: no {selector} exists for alpha={k.alpha!r}, beta={k.beta!r}")


def locked_alpha(cfg: ExperimentConfig) -> float:
    """alpha_S for the configuration's other kinetic parameters."""
    return snh_alpha(cfg.replace(alpha=0.0).kinetic_params())


_FIG3 = {"a": (0.0, -1.0), "b": (0.5, -1.5), "c": (1.0, -2.0)}
_FIG5 = {"a": -1.505, "b": -1.51, "c": -1.515}


def _presets() -> dict[str, ExperimentConfig]:
    base = ExperimentConfig()
    out = {}
    for tag, (beta, alpha) in _FIG3.items():
        out[f"fig3{tag}"] = base.replace(beta=beta, alpha=alpha, background="origin",
                                         perturbation="semistable", radius=2)
        twin = chr(ord(tag) + 3)
        out[f"fig3{twin}"] = base.replace(beta=beta, alpha=alpha, background="semistable",
                                          perturbation="origin", radius=80)
    for tag, alpha in _FIG5.items():
        out[f"fig5{tag}"] = base.replace(beta=0.5, alpha=alpha, background="origin",
                                         perturbation="stable-node", radius=2)
        twin = chr(ord(tag) + 3)
        out[f"fig5{twin}"] = base.replace(beta=0.5, alpha=alpha, background="stable-node",
                                          perturbation="origin", radius=80)
    out["fig6b"] = base.replace(beta=0.5, alpha=-1.5, n_sites=4000, background="semistable",
                                perturbation="origin", radius=250)
    out["fig7a"] = out["fig5b"].replace(dimension=2, n_sites=2000)
    out["fig7b"] = out["fig5e"].replace(dimension=2, n_sites=2000)
    for tag, (beta, alpha) in {"a": (1.0, -2.0), "b": (1.0, -2.1),
                               "c": (0.0, -1.0), "d": (0.0, -1.05)}.items():
        out[f"fig1{tag}"] = base.replace(beta=beta, alpha=alpha, trace_threshold=True)
    return out


PRESETS = _presets()


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
