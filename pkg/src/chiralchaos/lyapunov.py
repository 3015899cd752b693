"""Maximal Lyapunov exponent by tangent-space propagation (Benettin style).

A single tangent vector is carried along the trajectory with the analytic
Jacobian and renormalised every ``t_renorm``; the exponent is the time-average
of the logarithmic stretch factors.  For affine flows (g_om = 0) the exact
answer is the largest real part of the constant Jacobian's spectrum, which
``linear_lambda_oracle`` computes by a dense eigensolve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .integrator import TWO_PI, IntegrationConfig, Method, StiffnessError
from .model import DivergenceError, DriveSpec, StateVector, SystemParams, jacobian


@dataclass(frozen=True)
class LyapunovConfig:
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    t_average: float = 2000 * TWO_PI
    t_renorm: float = TWO_PI
    conv_tol: float = 5e-3

    def __post_init__(self):
        if isinstance(self.integration, dict):
            object.__setattr__(self, "integration", IntegrationConfig(**self.integration))
        for name in ("t_average", "t_renorm", "conv_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v!r}")
        if self.t_renorm > self.t_average:
            raise ValueError("t_renorm must not exceed t_average")

    @property
    def n_renorm(self) -> int:
        return max(1, int(round(self.t_average / self.t_renorm)))

    def with_(self, **changes) -> "LyapunovConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"integration": self.integration.to_dict(), "t_average": self.t_average,
                "t_renorm": self.t_renorm, "conv_tol": self.conv_tol}


@dataclass
class LyapunovEstimate:
    lambda_max: float
    history: np.ndarray
    converged: bool
    window: tuple[float, float]
    final_state: StateVector | None = None


# deterministic start direction; symmetric under the CW/CCW exchange
_V0 = np.full(10, 1.0 / math.sqrt(10.0))


def running_estimates(log_stretch: np.ndarray, t_renorm: float) -> np.ndarray:
    k = np.arange(1, len(log_stretch) + 1)
    return np.cumsum(log_stretch) / (k * t_renorm)


def is_converged(history: np.ndarray, conv_tol: float) -> bool:
    tail = history[-max(1, len(history) // 4):]
    return bool(np.std(tail) < conv_tol)


def max_lyapunov(params: SystemParams, drive: DriveSpec, config: LyapunovConfig | None = None,
                 initial: StateVector | None = None) -> LyapunovEstimate:
    """Estimate lambda_max over ``t_average`` after ``config.integration.t_transient``.

    The tangent dynamics do not depend on the drive, so a periodically
    modulated envelope (d_omega != 0) is handled by the same propagation.
    """
    cfg = config or LyapunovConfig()
    icfg = cfg.integration
    x0 = (initial or StateVector()).to_flat()
    pr = params.as_array()
    dr = drive.as_array()
    n = cfg.n_renorm
    if icfg.method is Method.RK4_FIXED:
        every = max(1, math.ceil(cfg.t_renorm / icfg.dt - 1e-9))
        h = cfg.t_renorm / every
        n_tr = int(round(icfg.t_transient / h))
        logs, xf, status, where = _kernels.rk4_lyapunov(x0, _V0, pr, dr, h, n_tr, n, every)
        fail_tau = where * h
        t0 = n_tr * h
    else:
        logs, xf, status, where = _kernels.dp_lyapunov(
            x0, _V0, pr, dr, icfg.dt, icfg.rel_tol, icfg.abs_tol, icfg.t_transient,
            cfg.t_renorm, n)
        fail_tau = where
        t0 = icfg.t_transient
    if status == _kernels.DIVERGED:
        raise DivergenceError(fail_tau)
    if status == _kernels.UNDERFLOW:
        raise StiffnessError(fail_tau)
    history = running_estimates(logs, cfg.t_renorm)
    return LyapunovEstimate(
        lambda_max=float(history[-1]),
        history=history,
        converged=is_converged(history, cfg.conv_tol),
        window=(float(t0), float(n * cfg.t_renorm)),
        final_state=StateVector.from_flat(xf),
    )


def linear_lambda_oracle(params: SystemParams, drive: DriveSpec | None = None) -> float:
    """Largest real part of the eigenvalues of the (constant) Jacobian of an
    affine flow.  Only valid for g_om == 0."""
    if params.g_om != 0.0:
        raise ValueError("linear_lambda_oracle requires g_om == 0 (affine flow)")
    jac = jacobian(params, drive or DriveSpec(), 0.0, np.zeros(10))
    return float(np.max(np.linalg.eigvals(jac).real))
