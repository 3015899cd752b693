"""Forward integration with transient discarding and uniform sampling."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .model import DivergenceError, DriveSpec, StateVector, SystemParams

TWO_PI = 2.0 * math.pi


class StiffnessError(RuntimeError):
    """Adaptive step size fell below the floor."""

    def __init__(self, tau: float):
        self.tau = float(tau)
        super().__init__(f"adaptive step underflow at tau={self.tau:.6g}")


class Method(str, enum.Enum):
    RK4_FIXED = "rk4"
    RK45_ADAPTIVE = "rk45"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, Method):
            return value
        v = str(value).strip().lower()
        aliases = {"rk4": cls.RK4_FIXED, "rk4fixed": cls.RK4_FIXED,
                   "rk45": cls.RK45_ADAPTIVE, "rk45adaptive": cls.RK45_ADAPTIVE,
                   "dopri5": cls.RK45_ADAPTIVE}
        try:
            return aliases[v.replace("_", "")]
        except KeyError:
            raise ValueError(f"unknown integration method {value!r}") from None


@dataclass(frozen=True)
class IntegrationConfig:
    """How to integrate: scheme, step/tolerances and the time windows (in tau)."""

    method: Method = Method.RK45_ADAPTIVE
    dt: float = TWO_PI / 200
    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    t_transient: float = 1000 * TWO_PI
    t_record: float = 200 * TWO_PI
    sample_dt: float = TWO_PI / 64

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        for name in ("dt", "rel_tol", "abs_tol", "t_record", "sample_dt"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v!r}")
        if not (math.isfinite(self.t_transient) and self.t_transient >= 0):
            raise ValueError(f"t_transient must be >= 0, got {self.t_transient!r}")
        if self.method is Method.RK4_FIXED and self.sample_dt < self.dt * (1 - 1e-12):
            raise ValueError("sample_dt must be >= dt for fixed-step integration")

    def with_(self, **changes) -> "IntegrationConfig":
        return replace(self, **changes)

    @property
    def n_samples(self) -> int:
        return int(round(self.t_record / self.sample_dt))

    def fixed_step(self) -> tuple[float, int]:
        """Largest step <= dt dividing sample_dt evenly, and the steps per sample."""
        every = max(1, math.ceil(self.sample_dt / self.dt - 1e-9))
        return self.sample_dt / every, every

    def to_dict(self) -> dict:
        return {"method": self.method.value, "dt": self.dt, "rel_tol": self.rel_tol,
                "abs_tol": self.abs_tol, "t_transient": self.t_transient,
                "t_record": self.t_record, "sample_dt": self.sample_dt}


RK4_REFERENCE = IntegrationConfig(method=Method.RK4_FIXED)


@dataclass
class Trajectory:
    """Recorded (post-transient) samples.  ``states`` is (n, 10) in flat ordering."""

    taus: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 2 or self.states.shape[1] != 10:
            raise ValueError("states must have shape (n, 10)")
        if len(self.taus) != len(self.states):
            raise ValueError("taus and states lengths differ")
        if len(self.taus) > 1 and not np.all(np.diff(self.taus) > 0):
            raise ValueError("taus must be strictly increasing")

    def __len__(self):
        return len(self.taus)

    @property
    def i_a(self) -> np.ndarray:
        s = self.states
        return (s[:, 0] ** 2 + s[:, 1] ** 2) + (s[:, 2] ** 2 + s[:, 3] ** 2)

    @property
    def i_b(self) -> np.ndarray:
        s = self.states
        return (s[:, 4] ** 2 + s[:, 5] ** 2) + (s[:, 6] ** 2 + s[:, 7] ** 2)

    @property
    def q(self) -> np.ndarray:
        return self.states[:, 8]

    @property
    def p(self) -> np.ndarray:
        return self.states[:, 9]

    @property
    def sample_dt(self) -> float:
        if len(self.taus) < 2:
            return float("nan")
        return float(self.taus[1] - self.taus[0])

    def state(self, k: int) -> StateVector:
        return StateVector.from_flat(self.states[k])

    @property
    def final(self) -> StateVector:
        return self.state(-1)


def integrate(params: SystemParams, drive: DriveSpec, config: IntegrationConfig | None = None,
              initial: StateVector | None = None) -> Trajectory:
    """Evolve from ``initial`` (all-zero by default), discard ``t_transient`` and
    record ``t_record`` at ``sample_dt``.

    Raises DivergenceError or StiffnessError carrying the failure time.
    """
    cfg = config or IntegrationConfig()
    x0 = (initial or StateVector()).to_flat()
    pr = params.as_array()
    dr = drive.as_array()
    n = cfg.n_samples
    if cfg.method is Method.RK4_FIXED:
        h, every = cfg.fixed_step()
        n_tr = int(round(cfg.t_transient / h))
        states, status, where = _kernels.rk4_trajectory(x0, pr, dr, h, n_tr, n, every)
        t0 = n_tr * h
        taus = t0 + h * every * np.arange(n)
        fail_tau = where * h
    else:
        states, status, where = _kernels.dp_trajectory(
            x0, pr, dr, cfg.dt, cfg.rel_tol, cfg.abs_tol, cfg.t_transient, cfg.sample_dt, n)
        taus = cfg.t_transient + cfg.sample_dt * np.arange(n)
        fail_tau = where
    if status == _kernels.DIVERGED:
        raise DivergenceError(fail_tau)
    if status == _kernels.UNDERFLOW:
        raise StiffnessError(fail_tau)
    return Trajectory(taus, states)


def max_intensity(trajectory: Trajectory) -> float:
    """Largest |a_cw|^2 + |a_ccw|^2 over the recorded window."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    return float(np.max(trajectory.i_a))
