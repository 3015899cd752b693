"""Detected-signal model, sensing windows and the dual-port protocol.

A weak signal of amplitude d_eps, detuning d_omega and phase theta rides on
the pump of the chosen port.  Its effect is an equivalent pump of amplitude
``eps_tot`` and extra phase ``theta_tot``; when the working point sits inside
a window where both ports are chaotic, a signal of either phase sign can push
one of the two ports out of chaos.  Feeding it through both ports (DualPort)
therefore catches phases the conventional single-port scheme misses.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._parallel import parallel_map
from .analysis import Observation, Thresholds, observe
from .analytic import OMEGA_DEFAULT
from .integrator import IntegrationConfig
from .lyapunov import LyapunovConfig
from .model import DriveSpec, Port, SystemParams

HBAR = 1.054571817e-34


class NoTransitionError(ValueError):
    """Both ends of a bracket carry the same chaos status."""


class Control(str, enum.Enum):
    PHI = "phi"
    EPS = "eps"
    DELTA = "delta"

    @classmethod
    def parse(cls, value) -> "Control":
        if isinstance(value, Control):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown control {value!r}; expected phi, eps or delta") from None


class Protocol(str, enum.Enum):
    SINGLE_PORT = "single"
    DUAL_PORT = "dual"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, Protocol):
            return value
        v = str(value).strip().lower().replace("_", "").replace("port", "")
        if v in ("single", "dual"):
            return cls(v)
        raise ValueError(f"unknown protocol {value!r}")


def apply_control(params: SystemParams, drive: DriveSpec, control: Control,
                  value: float) -> tuple[SystemParams, DriveSpec]:
    """Set the swept quantity.  DELTA moves both detunings together."""
    control = Control.parse(control)
    if control is Control.PHI:
        return params.with_(phi=value), drive
    if control is Control.EPS:
        return params, drive.with_(eps=value)
    return params.with_(delta_a=value, delta_b=value), drive


# ---------------------------------------------------------------------------
# composed drive


@dataclass(frozen=True)
class ComposedDrive:
    """Pump plus weak signal written as one amplitude and one extra phase."""

    eps: float
    d_eps: float = 0.0
    d_omega: float = 0.0
    theta: float = 0.0

    def _arg(self, tau):
        return self.d_omega * np.asarray(tau, dtype=np.float64) + self.theta

    def eps_tot(self, tau):
        if self.d_eps == 0.0:
            return np.full(np.shape(tau), float(self.eps)) if np.ndim(tau) else float(self.eps)
        a = self._arg(tau)
        return np.sqrt(self.eps ** 2 + self.d_eps ** 2 + 2.0 * self.eps * self.d_eps * np.cos(a))

    def theta_tot(self, tau):
        if self.d_eps == 0.0:
            return np.zeros(np.shape(tau)) if np.ndim(tau) else 0.0
        a = self._arg(tau)
        # the two-argument form stays correct when the signal outweighs the pump
        return np.arctan2(self.d_eps * np.sin(a), self.eps + self.d_eps * np.cos(a))

    def envelope(self, tau):
        """Complex envelope actually seen by the pumped mode."""
        return self.eps + self.d_eps * np.exp(-1j * self._arg(tau))

    def to_drive(self, port) -> DriveSpec:
        return DriveSpec(port=port, eps=self.eps, d_eps=self.d_eps,
                         d_omega=self.d_omega, theta=self.theta)


def compose_drive(eps: float, d_eps: float = 0.0, d_omega: float = 0.0,
                  theta: float = 0.0) -> ComposedDrive:
    if not (math.isfinite(eps) and eps > 0):
        raise ValueError(f"eps must be > 0, got {eps!r}")
    if not (math.isfinite(d_eps) and d_eps >= 0):
        raise ValueError(f"d_eps must be >= 0, got {d_eps!r}")
    return ComposedDrive(float(eps), float(d_eps), float(d_omega), float(theta))


def signal_amplitude(power: float, omega_signal: float, kappa0: float,
                     omega_norm: float = OMEGA_DEFAULT) -> float:
    """Signal amplitude sqrt(kappa0 p / (hbar omega)) in units of ``omega_norm``.

    ``omega_signal`` is the signal's optical angular frequency (rad/s).
    """
    if power < 0 or not (omega_signal > 0) or not (kappa0 > 0) or not (omega_norm > 0):
        raise ValueError("power must be >= 0 and omega_signal, kappa0, omega_norm > 0")
    return math.sqrt(kappa0 * power / (HBAR * omega_signal)) / omega_norm


def signal_power(d_eps: float, omega_signal: float, kappa0: float,
                 omega_norm: float = OMEGA_DEFAULT) -> float:
    """Inverse of :func:`signal_amplitude`."""
    amp = d_eps * omega_norm
    return HBAR * omega_signal * amp * amp / kappa0


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SensingConfig:
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    amp_change_tol: float = 0.02

    def __post_init__(self):
        if isinstance(self.integration, dict):
            object.__setattr__(self, "integration", IntegrationConfig(**self.integration))
        if isinstance(self.lyapunov, dict):
            object.__setattr__(self, "lyapunov", LyapunovConfig(**self.lyapunov))
        if isinstance(self.thresholds, dict):
            object.__setattr__(self, "thresholds", Thresholds(**self.thresholds))
        if not (self.amp_change_tol >= 0):
            raise ValueError("amp_change_tol must be >= 0")

    def to_dict(self) -> dict:
        return {"integration": self.integration.to_dict(), "lyapunov": self.lyapunov.to_dict(),
                "thresholds": self.thresholds.to_dict(), "amp_change_tol": self.amp_change_tol}


def _observe(params: SystemParams, drive: DriveSpec, cfg: SensingConfig) -> Observation:
    return observe(params, drive, cfg.integration, cfg.lyapunov, cfg.thresholds)


def chaos_classifier(cfg: SensingConfig | None = None) -> Callable[[SystemParams, DriveSpec], bool]:
    cfg = cfg or SensingConfig()
    return lambda p, d: _observe(p, d, cfg).is_chaotic


# ---------------------------------------------------------------------------
# transitions and windows


def find_transition(params: SystemParams, drive: DriveSpec, control, value_range,
                    resolution: float, classifier: Callable | None = None,
                    config: SensingConfig | None = None) -> float:
    """Bisect on the chaos status along ``control`` until the bracket is
    narrower than ``resolution``; returns the bracket midpoint.

    ``classifier(params, drive) -> bool`` defaults to the Lyapunov-based
    chaos test.
    """
    control = Control.parse(control)
    lo, hi = (float(v) for v in value_range)
    if not (resolution > 0):
        raise ValueError("resolution must be > 0")
    if not lo < hi:
        raise ValueError("range must be increasing")
    chaotic = classifier or chaos_classifier(config)

    def status(v):
        return bool(chaotic(*apply_control(params, drive, control, v)))

    s_lo, s_hi = status(lo), status(hi)
    if s_lo == s_hi:
        raise NoTransitionError(
            f"no order/chaos change of {control.value} on [{lo}, {hi}] for port {int(drive.port)}")
    while hi - lo >= resolution:
        mid = 0.5 * (lo + hi)
        if status(mid) == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SensingWindow:
    control: Control
    crit_port1: float
    crit_port2: float
    half_width_d: float
    center_p: float
    working_point_f: float

    @classmethod
    def from_critical(cls, control, crit_port1: float, crit_port2: float,
                      working_point: float | None = None) -> "SensingWindow":
        c1, c2 = float(crit_port1), float(crit_port2)
        d = abs(c1 - c2) / 2.0
        p = (c1 + c2) / 2.0
        f = p if working_point is None else float(working_point)
        if d > 0 and not (min(c1, c2) < f < max(c1, c2)):
            raise ValueError(f"working point {f} is not inside the window ({min(c1, c2)}, {max(c1, c2)})")
        return cls(Control.parse(control), c1, c2, d, p, f)

    @property
    def degenerate(self) -> bool:
        return self.half_width_d == 0.0

    def with_working_point(self, f: float) -> "SensingWindow":
        return SensingWindow.from_critical(self.control, self.crit_port1, self.crit_port2, f)

    def to_dict(self) -> dict:
        return {"control": self.control.value, "crit_port1": self.crit_port1,
                "crit_port2": self.crit_port2, "D": self.half_width_d, "P": self.center_p,
                "F": self.working_point_f, "degenerate": self.degenerate}


def build_window(params: SystemParams, control, value_range, resolution: float,
                 drive: DriveSpec | None = None, working_point: float | None = None,
                 classifier: Callable | None = None,
                 config: SensingConfig | None = None) -> SensingWindow:
    """Locate the order/chaos transition for each pump port over the same
    range and build the window between them."""
    base = drive or DriveSpec()
    crit = {}
    for port in Port:
        crit[port] = find_transition(params, base.with_(port=port), control, value_range,
                                     resolution, classifier, config)
    return SensingWindow.from_critical(control, crit[Port.PORT1], crit[Port.PORT2], working_point)


# ---------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class PortRun:
    """Observation summary of one run; the unit of work of a trial."""

    port: Port
    chaotic: bool
    label: str
    lambda_max: float
    i_a_max: float


@dataclass(frozen=True)
class PortOutcome:
    port: Port
    transition_induced: bool
    amplitude_changed: bool
    delta_i_a: float
    label: str = ""

    @property
    def success(self) -> bool:
        return self.transition_induced and self.amplitude_changed


@dataclass(frozen=True)
class SensingOutcome:
    """Verdict of one trial.  For DualPort the headline fields come from the
    first successful port (port 2 if neither succeeds); ``ports`` holds all."""

    transition_induced: bool
    amplitude_changed: bool
    delta_i_a: float
    protocol: Protocol = Protocol.DUAL_PORT
    ports: tuple[PortOutcome, ...] = ()

    @property
    def success(self) -> bool:
        return self.transition_induced and self.amplitude_changed

    def port(self, port) -> PortOutcome | None:
        port = Port.parse(port)
        for o in self.ports:
            if o.port is port:
                return o
        return None


Baselines = dict  # Port -> PortRun


def run_port(params: SystemParams, drive: DriveSpec, cfg: SensingConfig) -> PortRun:
    obs = _observe(params, drive, cfg)
    return PortRun(drive.port, obs.is_chaotic, obs.phase.label.value,
                   obs.phase.lambda_max, obs.i_a_max)


def working_point(params: SystemParams, window: SensingWindow,
                  drive: DriveSpec | None) -> tuple[SystemParams, DriveSpec]:
    return apply_control(params, drive or DriveSpec(), window.control, window.working_point_f)


def compare(baseline: PortRun, trial: PortRun, amp_change_tol: float) -> PortOutcome:
    """Criterion i: chaos status flips.  Criterion ii: relative change of
    I_A,max above ``amp_change_tol``."""
    delta = trial.i_a_max - baseline.i_a_max
    ref = abs(baseline.i_a_max)
    rel = abs(delta) / ref if ref > 0 else (math.inf if delta != 0 else 0.0)
    return PortOutcome(trial.port, trial.chaotic != baseline.chaotic,
                       rel > amp_change_tol, float(delta), trial.label)


def _ports_for(protocol: Protocol) -> tuple[Port, ...]:
    return (Port.PORT2,) if protocol is Protocol.SINGLE_PORT else (Port.PORT1, Port.PORT2)


def combine(per_port: Sequence[PortOutcome], protocol: Protocol) -> SensingOutcome:
    per_port = tuple(per_port)
    wins = [o for o in per_port if o.success]
    if wins:
        lead = wins[0]
    else:
        lead = next((o for o in per_port if o.port is Port.PORT2), per_port[0])
    return SensingOutcome(lead.transition_induced, lead.amplitude_changed, lead.delta_i_a,
                          protocol, per_port)


def compute_baselines(params: SystemParams, window: SensingWindow, drive: DriveSpec | None = None,
                      config: SensingConfig | None = None, workers: int = 1) -> Baselines:
    """Signal-free runs at the working point, one per port."""
    cfg = config or SensingConfig()
    p, d = working_point(params, window, drive)
    jobs = [(p, d.with_(port=port, d_eps=0.0, d_omega=0.0, theta=0.0), cfg) for port in Port]
    runs = parallel_map(_run_job, jobs, workers)
    return {r.port: r for r in runs}


def _run_job(job) -> PortRun:
    return run_port(*job)


def run_trial(params: SystemParams, window: SensingWindow, d_eps: float, d_omega: float,
              theta: float, protocol=Protocol.DUAL_PORT, drive: DriveSpec | None = None,
              config: SensingConfig | None = None,
              baselines: Baselines | None = None) -> SensingOutcome:
    """One sensing event.

    Each run repeats the baseline protocol (same rest initial state, same
    windows) with the signal on from tau = 0, so ``d_eps = 0`` reproduces the
    baseline exactly.
    """
    protocol = Protocol.parse(protocol)
    cfg = config or SensingConfig()
    if baselines is None:
        baselines = compute_baselines(params, window, drive, cfg)
    p, d = working_point(params, window, drive)
    outcomes = []
    for port in _ports_for(protocol):
        run = run_port(p, d.with_(port=port, d_eps=d_eps, d_omega=d_omega, theta=theta), cfg)
        outcomes.append(compare(baselines[port], run, cfg.amp_change_tol))
    return combine(outcomes, protocol)


# ---------------------------------------------------------------------------
# success-rate experiments


def theta_grid(n: int = 16) -> np.ndarray:
    if n < 1:
        raise ValueError("theta grid needs at least one point")
    return 2.0 * math.pi * np.arange(n) / n


@dataclass
class RateRow:
    theta: float
    second_axis: float
    port1_success: bool
    port2_success: bool
    delta_i_a_1: float
    delta_i_a_2: float

    @property
    def dual_success(self) -> bool:
        return self.port1_success or self.port2_success

    @property
    def single_success(self) -> bool:
        return self.port2_success


@dataclass
class RateTable:
    second_axis_name: str
    thetas: np.ndarray
    second_values: np.ndarray
    rows: list[RateRow]
    window: SensingWindow | None = None
    baselines: dict = field(default_factory=dict)

    def _rate(self, attr: str) -> np.ndarray:
        out = np.zeros(len(self.second_values))
        for j, s in enumerate(self.second_values):
            hits = [getattr(r, attr) for r in self.rows if r.second_axis == s]
            out[j] = float(np.mean(hits)) if hits else 0.0
        return out

    @property
    def dual_rate(self) -> np.ndarray:
        return self._rate("dual_success")

    @property
    def single_rate(self) -> np.ndarray:
        return self._rate("single_success")

    def success_map(self, which: str = "dual") -> np.ndarray:
        """Boolean array (second_axis, theta)."""
        attr = {"dual": "dual_success", "single": "single_success",
                "port1": "port1_success", "port2": "port2_success"}[which]
        m = np.zeros((len(self.second_values), len(self.thetas)), dtype=bool)
        for k, r in enumerate(self.rows):
            m[k // len(self.thetas), k % len(self.thetas)] = getattr(r, attr)
        return m

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "second_axis", "port1_success", "port2_success", "dual_success",
                        "delta_i_a_1", "delta_i_a_2"])
            for r in self.rows:
                w.writerow([repr(float(r.theta)), repr(float(r.second_axis)), int(r.port1_success),
                            int(r.port2_success), int(r.dual_success), repr(float(r.delta_i_a_1)),
                            repr(float(r.delta_i_a_2))])

    def summary(self) -> dict:
        out = {"second_axis": self.second_axis_name,
               "second_values": [float(v) for v in self.second_values],
               "n_theta": len(self.thetas),
               "dual_rate": [float(v) for v in self.dual_rate],
               "single_rate": [float(v) for v in self.single_rate]}
        if self.window is not None:
            out["window"] = self.window.to_dict()
        if self.baselines:
            out["baselines"] = {str(int(k)): {"label": v.label, "lambda_max": v.lambda_max,
                                              "i_a_max": v.i_a_max}
                                for k, v in sorted(self.baselines.items())}
        return out

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def success_rate_sweep(params: SystemParams, window: SensingWindow, thetas=None,
                       second_axis: str = "d_eps", second_values=(0.0,), d_eps: float = 0.0,
                       d_omega: float = 0.0, drive: DriveSpec | None = None,
                       config: SensingConfig | None = None, workers: int = 1,
                       trial_fn: Callable | None = None) -> RateTable:
    """Success map over theta x (d_eps or d_omega) for both ports at once.

    Single-port rates read the port-2 column, dual-port rates the OR of both.
    ``trial_fn(theta, d_eps, d_omega) -> (PortOutcome, PortOutcome)`` replaces
    the simulation (useful for stubs).
    """
    if second_axis not in ("d_eps", "d_omega"):
        raise ValueError("second_axis must be 'd_eps' or 'd_omega'")
    thetas = theta_grid() if thetas is None else np.asarray(thetas, dtype=np.float64)
    seconds = np.atleast_1d(np.asarray(second_values, dtype=np.float64))
    if len(thetas) == 0 or len(seconds) == 0:
        raise ValueError("success-rate grid is empty")
    points = []
    for s in seconds:
        de, dw = (s, d_omega) if second_axis == "d_eps" else (d_eps, s)
        for th in thetas:
            points.append((float(th), float(s), float(de), float(dw)))

    baselines = {}
    if trial_fn is None:
        cfg = config or SensingConfig()
        baselines = compute_baselines(params, window, drive, cfg, workers)
        p, d = working_point(params, window, drive)
        jobs = [(p, d.with_(port=port, d_eps=de, d_omega=dw, theta=th), cfg)
                for (th, _, de, dw) in points for port in Port]
        runs = parallel_map(_run_job, jobs, workers)
        pairs = [(compare(baselines[Port.PORT1], runs[2 * k], cfg.amp_change_tol),
                  compare(baselines[Port.PORT2], runs[2 * k + 1], cfg.amp_change_tol))
                 for k in range(len(points))]
    else:
        pairs = [tuple(trial_fn(th, de, dw)) for (th, _, de, dw) in points]

    rows = [RateRow(th, s, o1.success, o2.success, o1.delta_i_a, o2.delta_i_a)
            for (th, s, _, _), (o1, o2) in zip(points, pairs)]
    return RateTable(second_axis, thetas, seconds, rows, window, baselines)
