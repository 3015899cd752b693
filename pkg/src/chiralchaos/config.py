"""JSON run configuration shared by the command-line tools.

Every section is optional and falls back to the reference device values.
Unknown keys are rejected with the line on which they appear.  Angles are
radians; ``phi_over_pi`` (in ``params``) and an axis named ``phi_over_pi``
are accepted as a convenience and converted on load.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .analysis import Thresholds
from .analytic import OMEGA_DEFAULT, TipConfig
from .integrator import IntegrationConfig
from .lyapunov import LyapunovConfig
from .model import DriveSpec, SystemParams
from .sensing import SensingConfig
from .sweep import Axis

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    """Either explicit critical points, or a search range for both ports."""

    control: str = "phi"
    range: tuple[float, float] | None = None
    resolution: float | None = None
    working_point: float | None = None
    crit_port1: float | None = None
    crit_port2: float | None = None

    @property
    def explicit(self) -> bool:
        return self.crit_port1 is not None and self.crit_port2 is not None


@dataclass(frozen=True)
class SensingSpec:
    amp_change_tol: float = 0.02
    n_theta: int = 16
    second_axis: str = "d_eps"
    second_values: tuple[float, ...] = (300.0,)
    d_eps: float = 0.0
    d_omega: float = 0.0
    theta: float | None = None  # fixes theta instead of sweeping it


@dataclass(frozen=True)
class TipSpec:
    base: TipConfig = field(default_factory=TipConfig)
    r1_range: tuple[float, float] = (20e-9, 80e-9)
    r2_range: tuple[float, float] = (20e-9, 80e-9)
    beta_range: tuple[float, float] = (-math.pi, math.pi)
    counts: tuple[int, int, int] = (16, 16, 64)
    n_phi_bins: int = 72
    omega: float = OMEGA_DEFAULT


@dataclass(frozen=True)
class SteadySpec:
    eps: float = 10.0
    self_consistent: bool = False


@dataclass(frozen=True)
class MetricsSpec:
    lambda_1: tuple[float, ...] | None = None
    lambda_2: tuple[float, ...] | None = None


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    drive: DriveSpec = field(default_factory=DriveSpec)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    grid: tuple[Axis, ...] | None = None
    ports: tuple[int, ...] = (1, 2)
    window: WindowSpec | None = None
    sensing: SensingSpec = field(default_factory=SensingSpec)
    tip: TipSpec = field(default_factory=TipSpec)
    steady: SteadySpec = field(default_factory=SteadySpec)
    metrics: MetricsSpec = field(default_factory=MetricsSpec)
    description: str = ""

    def sensing_config(self) -> SensingConfig:
        return SensingConfig(self.integration, self.lyapunov, self.thresholds,
                             self.sensing.amp_change_tol)


# ---------------------------------------------------------------------------
# loading


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key)
    return f"line {line}: " if line else ""


def _check_keys(section: str, data, allowed, text: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{_where(text, section)}'{section}' must be an object")
    for k in data:
        if k not in allowed:
            raise ConfigError(f"{_where(text, k)}unknown key '{k}' in '{section}' "
                              f"(allowed: {', '.join(sorted(allowed))})")
    return data


def _names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _section(section: str, cls, data, text: str, extra: set[str] = frozenset()):
    data = dict(_check_keys(section, data, _names(cls) | set(extra), text))
    return data


def _make(section: str, cls, kwargs: dict, text: str):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{_where(text, section)}invalid '{section}': {exc}") from None


def _tuple(v):
    return tuple(v) if isinstance(v, list) else v


def parse_config(data: dict, text: str = "") -> RunConfig:
    """Build a RunConfig from a decoded JSON object; ``text`` is the source
    used to attach line numbers to errors."""
    top = _check_keys("<root>", data, _names(RunConfig) | {"schema_version"}, text)
    version = top.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{_where(text, 'schema_version')}unsupported schema_version "
                          f"{version!r} (this build reads {SCHEMA_VERSION})")
    out = {}

    if "params" in top:
        p = _section("params", SystemParams, top["params"], text, {"phi_over_pi"})
        if "phi_over_pi" in p:
            if "phi" in p:
                raise ConfigError(f"{_where(text, 'phi_over_pi')}give phi or phi_over_pi, not both")
            p["phi"] = math.pi * float(p.pop("phi_over_pi"))
        out["params"] = _make("params", SystemParams, p, text)
    if "drive" in top:
        out["drive"] = _make("drive", DriveSpec, _section("drive", DriveSpec, top["drive"], text),
                             text)
    if "integration" in top:
        out["integration"] = _make("integration", IntegrationConfig,
                                   _section("integration", IntegrationConfig, top["integration"],
                                          text), text)
    icfg = out.get("integration", IntegrationConfig())
    lyap = _check_keys("lyapunov", top.get("lyapunov", {}), {"t_average", "t_renorm", "conv_tol"},
                       text)
    out["lyapunov"] = _make("lyapunov", LyapunovConfig, {"integration": icfg, **lyap}, text)
    if "thresholds" in top:
        out["thresholds"] = _make("thresholds", Thresholds,
                                  _section("thresholds", Thresholds, top["thresholds"], text), text)
    if "grid" in top:
        g = _check_keys("grid", top["grid"], {"axes"}, text)
        axes = []
        for a in g.get("axes", []):
            a = dict(_check_keys("axes", a, {"name", "min", "max", "count"}, text))
            if a.get("name") == "phi_over_pi":
                a.update(name="phi", min=math.pi * a["min"], max=math.pi * a["max"])
            axes.append(_make("axes", Axis, a, text))
        if not 1 <= len(axes) <= 2:
            raise ConfigError(f"{_where(text, 'grid')}grid needs one or two axes")
        out["grid"] = tuple(axes)
    if "ports" in top:
        ports = top["ports"]
        if not isinstance(ports, list) or not ports or any(p not in (1, 2) for p in ports):
            raise ConfigError(f"{_where(text, 'ports')}ports must be a non-empty list of 1 and/or 2")
        out["ports"] = tuple(ports)
    if "window" in top:
        w = _section("window", WindowSpec, top["window"], text, {"range_over_pi"})
        if "range_over_pi" in w:
            w["range"] = [math.pi * v for v in w.pop("range_over_pi")]
        w["range"] = _tuple(w.get("range"))
        spec = _make("window", WindowSpec, w, text)
        if not spec.explicit and (spec.range is None or spec.resolution is None):
            raise ConfigError(f"{_where(text, 'window')}window needs crit_port1/crit_port2 "
                              "or range and resolution")
        out["window"] = spec
    if "sensing" in top:
        s = _section("sensing", SensingSpec, top["sensing"], text)
        if "second_values" in s:
            s["second_values"] = tuple(float(v) for v in s["second_values"])
        spec = _make("sensing", SensingSpec, s, text)
        if spec.second_axis not in ("d_eps", "d_omega"):
            raise ConfigError(f"{_where(text, 'second_axis')}second_axis must be d_eps or d_omega")
        out["sensing"] = spec
    if "tip" in top:
        t = dict(_check_keys("tip", top["tip"], _names(TipConfig) | _names(TipSpec) - {"base"},
                             text))
        spec_kw = {k: _tuple(t.pop(k)) for k in list(t) if k in _names(TipSpec)}
        spec_kw["base"] = _make("tip", TipConfig, t, text)
        out["tip"] = _make("tip", TipSpec, spec_kw, text)
    if "steady" in top:
        out["steady"] = _make("steady", SteadySpec, _section("steady", SteadySpec, top["steady"],
                                                           text), text)
    if "metrics" in top:
        m = {k: _tuple(v) for k, v in _section("metrics", MetricsSpec, top["metrics"], text).items()}
        out["metrics"] = _make("metrics", MetricsSpec, m, text)
    if "description" in top:
        out["description"] = str(top["description"])
    return RunConfig(**out)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    return loads_config(text, str(path))


def loads_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_config(data, text)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def preset_names() -> list[str]:
    root = resources.files("chiralchaos") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_text(name: str) -> str:
    root = resources.files("chiralchaos") / "presets"
    f = root / f"{name}.json"
    if not f.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return f.read_text()


def load_preset(name: str) -> RunConfig:
    return loads_config(preset_text(name), f"preset {name}")
