"""Parameters, state and equations of motion of the two-resonator device.

All rates are in units of the mechanical frequency (Omega = 1) and time is
tau = Omega * t.  Resonator A carries the optomechanical coupling and the
intrinsic backscattering eta; resonator B carries the tip-induced scattering
|xi| exp(+-i phi); the two are coupled by hopping J between counter-rotating
modes (a_cw <-> b_ccw, a_ccw <-> b_cw).

Flat real ordering of the state, relied on by stored fixtures::

    [Re a_cw, Im a_cw, Re a_ccw, Im a_ccw,
     Re b_cw, Im b_cw, Re b_ccw, Im b_ccw, q, p]
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import _kernels


class DivergenceError(RuntimeError):
    """The state became non-finite (or astronomically large)."""

    def __init__(self, tau: float, message: str | None = None):
        self.tau = float(tau)
        super().__init__(message or f"state diverged at tau={self.tau:.6g}")


class Port(enum.IntEnum):
    PORT1 = 1  # pump enters a_cw
    PORT2 = 2  # pump enters a_ccw

    @classmethod
    def parse(cls, value) -> "Port":
        if isinstance(value, Port):
            return value
        if isinstance(value, str):
            v = value.strip().lower().replace("_", "")
            if v in ("1", "port1", "p1"):
                return cls.PORT1
            if v in ("2", "port2", "p2"):
                return cls.PORT2
            raise ValueError(f"unknown port {value!r}")
        return cls(int(value))

    def other(self) -> "Port":
        return Port.PORT2 if self is Port.PORT1 else Port.PORT1


def wrap_phase(phi: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    r = math.remainder(phi, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True)
class SystemParams:
    """Normalised rates and detunings of the device.

    Defaults are the reference values used for the phase diagrams
    (eta=0.15, J=2, Gamma=5e-3, gamma=5, kappa=0.25, G=5e-5,
    Delta_A = Delta_B = -0.5, |xi| = 3).
    """

    delta_a: float = -0.5
    delta_b: float = -0.5
    kappa: float = 0.25
    gamma: float = 5.0
    g_om: float = 5e-5
    gamma_m: float = 5e-3
    eta: float = 0.15
    xi_mag: float = 3.0
    phi: float = 0.0
    j_coupling: float = 2.0

    def __post_init__(self):
        for name in ("kappa", "gamma", "g_om", "gamma_m", "eta", "xi_mag", "j_coupling"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        for name in ("delta_a", "delta_b", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "phi", wrap_phase(float(self.phi)))

    def as_array(self) -> np.ndarray:
        return np.array([self.delta_a, self.delta_b, self.kappa, self.gamma, self.g_om,
                         self.gamma_m, self.eta, self.xi_mag, self.phi, self.j_coupling],
                        dtype=np.float64)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def mirrored(self) -> "SystemParams":
        return replace(self, phi=-self.phi)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DriveSpec:
    """Pump (and optional detected signal) entering one port.

    The complex envelope seen by the pumped mode is
    ``eps + d_eps * exp(-i (d_omega * tau + theta))``.
    """

    port: Port = Port.PORT1
    eps: float = 5.8e4
    d_eps: float = 0.0
    d_omega: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "port", Port.parse(self.port))
        if not math.isfinite(self.eps) or self.eps < 0:
            raise ValueError(f"eps must be finite and >= 0, got {self.eps!r}")
        if not math.isfinite(self.d_eps) or self.d_eps < 0:
            raise ValueError(f"d_eps must be finite and >= 0, got {self.d_eps!r}")
        if not (math.isfinite(self.d_omega) and math.isfinite(self.theta)):
            raise ValueError("d_omega and theta must be finite")

    @property
    def is_autonomous(self) -> bool:
        return self.d_eps == 0.0 or self.d_omega == 0.0

    def as_array(self) -> np.ndarray:
        return np.array([float(int(self.port)), self.eps, self.d_eps, self.d_omega, self.theta],
                        dtype=np.float64)

    def envelope(self, tau: float) -> complex:
        return complex(_kernels.drive_envelope(self.as_array(), float(tau)))

    def with_(self, **changes) -> "DriveSpec":
        return replace(self, **changes)

    def mirrored(self) -> "DriveSpec":
        return replace(self, port=self.port.other())

    def to_dict(self) -> dict:
        return {"port": int(self.port), "eps": self.eps, "d_eps": self.d_eps,
                "d_omega": self.d_omega, "theta": self.theta}


@dataclass(frozen=True)
class StateVector:
    a_cw: complex = 0j
    a_ccw: complex = 0j
    b_cw: complex = 0j
    b_ccw: complex = 0j
    q: float = 0.0
    p: float = 0.0

    def to_flat(self) -> np.ndarray:
        return np.array([self.a_cw.real, self.a_cw.imag, self.a_ccw.real, self.a_ccw.imag,
                         self.b_cw.real, self.b_cw.imag, self.b_ccw.real, self.b_ccw.imag,
                         self.q, self.p], dtype=np.float64)

    @classmethod
    def from_flat(cls, x) -> "StateVector":
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (10,):
            raise ValueError(f"flat state must have shape (10,), got {x.shape}")
        return cls(complex(x[0], x[1]), complex(x[2], x[3]), complex(x[4], x[5]),
                   complex(x[6], x[7]), float(x[8]), float(x[9]))

    @property
    def i_a(self) -> float:
        return abs(self.a_cw) ** 2 + abs(self.a_ccw) ** 2

    @property
    def i_b(self) -> float:
        return abs(self.b_cw) ** 2 + abs(self.b_ccw) ** 2

    def swapped(self) -> "StateVector":
        return StateVector(self.a_ccw, self.a_cw, self.b_ccw, self.b_cw, self.q, self.p)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_flat())))


# index permutation implementing the CW <-> CCW exchange on flat vectors
SWAP_INDEX = np.array([2, 3, 0, 1, 6, 7, 4, 5, 8, 9])


def swap_flat(x: np.ndarray) -> np.ndarray:
    """Exchange CW and CCW components of flat state(s) along the last axis."""
    return np.asarray(x)[..., SWAP_INDEX]


def _as_flat(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.to_flat()
    x = np.ascontiguousarray(state, dtype=np.float64)
    if x.shape != (10,):
        raise ValueError(f"flat state must have shape (10,), got {x.shape}")
    return x


def rhs_flat(params: SystemParams, drive: DriveSpec, tau: float, state) -> np.ndarray:
    x = _as_flat(state)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(tau, f"non-finite state at tau={tau}")
    out = np.empty(10)
    _kernels.rhs(x, params.as_array(), drive.as_array(), float(tau), out)
    return out


def rhs(params: SystemParams, drive: DriveSpec, tau: float, state: StateVector) -> StateVector:
    """Time derivative dX/dtau, returned in StateVector form."""
    return StateVector.from_flat(rhs_flat(params, drive, tau, state))


def jacobian(params: SystemParams, drive: DriveSpec, tau: float, state) -> np.ndarray:
    """Analytic 10x10 Jacobian d(dX/dtau)/dX in the flat real ordering.

    Only the radiation-pressure terms depend on the state; the drive and
    ``tau`` do not enter (they are accepted for signature symmetry with rhs).
    """
    x = _as_flat(state)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(tau, f"non-finite state at tau={tau}")
    pr = params
    g = pr.g_om
    q = x[8]
    jac = np.zeros((10, 10))

    def cblock(row, col, c):
        # real 2x2 representation of multiplication by complex c
        jac[row, col] += c.real
        jac[row, col + 1] += -c.imag
        jac[row + 1, col] += c.imag
        jac[row + 1, col + 1] += c.real

    ca = -1j * (pr.delta_a - 1j * pr.kappa) + 1j * g * q
    cb = -1j * (pr.delta_b - 1j * pr.gamma)
    xp = 1j * pr.xi_mag * complex(math.cos(pr.phi), math.sin(pr.phi))
    xm = 1j * pr.xi_mag * complex(math.cos(pr.phi), -math.sin(pr.phi))
    ie = 1j * pr.eta
    ij = 1j * pr.j_coupling

    # a_cw row (0, 1)
    cblock(0, 0, ca)
    cblock(0, 2, ie)
    cblock(0, 6, ij)
    # a_ccw row (2, 3)
    cblock(2, 2, ca)
    cblock(2, 0, ie)
    cblock(2, 4, ij)
    # b_cw row (4, 5)
    cblock(4, 4, cb)
    cblock(4, 6, xp)
    cblock(4, 2, ij)
    # b_ccw row (6, 7)
    cblock(6, 6, cb)
    cblock(6, 4, xm)
    cblock(6, 0, ij)
    # d/dq of i g a q
    for row, (re, im) in ((0, (x[0], x[1])), (2, (x[2], x[3]))):
        jac[row, 8] = -g * im
        jac[row + 1, 8] = g * re
    jac[8, 9] = 1.0
    jac[9, 8] = -1.0
    jac[9, 9] = -pr.gamma_m
    jac[9, 0:4] = 2.0 * g * x[0:4]
    return jac


def jvp(params: SystemParams, state, vector) -> np.ndarray:
    """Jacobian-vector product via the compiled kernel used for tangent propagation."""
    x = _as_flat(state)
    v = np.ascontiguousarray(vector, dtype=np.float64)
    out = np.empty(10)
    _kernels.jvp(x, v, params.as_array(), out)
    return out
