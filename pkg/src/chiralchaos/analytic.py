"""Closed-form steady state and the tip-geometry map.

The steady state eliminates resonator B through the factor
F = J^2 |xi| / ((Delta_B - i gamma)^2 - |xi|^2) and an effective detuning
for resonator A.  The radiation-pressure self-shift G^2 I_A of that detuning
is dropped by default (G << Omega); ``self_consistent=True`` keeps it and
solves the resulting scalar fixed point instead.

The tip map converts two Rayleigh scatterers on resonator B (radii, indices,
angular separation) into |xi|, phi, the common shift delta, the extra damping
gamma_t and the dissipative coupling |zeta| e^{i Theta}, in SI units, with
``Omega`` as the normalising frequency.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .model import Port, StateVector, SystemParams

OMEGA_DEFAULT = 2.0 * math.pi * 20e6  # rad/s


class SingularityError(ArithmeticError):
    pass


@dataclass
class SteadySolution:
    a_cw_s: complex
    a_ccw_s: complex
    b_cw_s: complex
    b_ccw_s: complex
    q_s: float
    p_s: float
    i_a_s: float
    i_b_s: float
    delta_tilde_a: complex
    f_factor: complex
    g_factor: float

    @property
    def state(self) -> StateVector:
        return StateVector(self.a_cw_s, self.a_ccw_s, self.b_cw_s, self.b_ccw_s,
                           self.q_s, self.p_s)


def _solve(params: SystemParams, port: Port, eps: float, shift: float):
    pr = params
    zb = pr.delta_b - 1j * pr.gamma
    pole = zb * zb - pr.xi_mag ** 2
    if abs(pole) < 1e-300:
        raise SingularityError("(Delta_B - i gamma)^2 = |xi|^2: F has a pole")
    f = pr.j_coupling ** 2 * pr.xi_mag / pole
    ep = np.exp(1j * pr.phi)
    em = np.exp(-1j * pr.phi)
    # F (Delta_B - i gamma)/|xi| written without dividing by |xi| (finite at xi=0)
    dt = pr.delta_a - shift - 1j * pr.kappa - pr.j_coupling ** 2 * zb / pole
    up = pr.eta + f * ep
    um = pr.eta + f * em
    den = dt * dt - um * up
    if abs(den) < 1e-300:
        raise SingularityError("vanishing steady-state denominator")
    e1 = eps if port is Port.PORT1 else 0.0
    e2 = eps if port is Port.PORT2 else 0.0
    a_cw = -1j * (e2 * um + e1 * dt) / den
    a_ccw = -1j * (e1 * up + e2 * dt) / den
    b_cw = (pr.j_coupling * pr.xi_mag * ep * a_cw + pr.j_coupling * zb * a_ccw) / pole
    b_ccw = (pr.j_coupling * pr.xi_mag * em * a_ccw + pr.j_coupling * zb * a_cw) / pole
    return a_cw, a_ccw, b_cw, b_ccw, dt, f, den


def steady_state(params: SystemParams, port, eps: float,
                 self_consistent: bool = False) -> SteadySolution:
    """Stationary amplitudes for a monochromatic pump of amplitude ``eps``."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    port = Port.parse(port)
    g = params.g_om
    shift = 0.0
    sol = _solve(params, port, eps, shift)
    if self_consistent and g != 0.0 and eps != 0.0:
        # I_A scales as eps^2 * h(shift); iterate shift = G^2 I_A(shift)
        for _ in range(200):
            i_a = abs(sol[0]) ** 2 + abs(sol[1]) ** 2
            new = g * g * i_a
            if abs(new - shift) <= 1e-15 * max(1.0, abs(new)):
                shift = new
                break
            shift = new
            sol = _solve(params, port, eps, shift)
        else:
            raise SingularityError("self-consistent steady state did not converge")
        sol = _solve(params, port, eps, shift)
    a_cw, a_ccw, b_cw, b_ccw, dt, f, den = sol
    i_a = abs(a_cw) ** 2 + abs(a_ccw) ** 2
    i_b = abs(b_cw) ** 2 + abs(b_ccw) ** 2
    return SteadySolution(
        a_cw_s=complex(a_cw), a_ccw_s=complex(a_ccw), b_cw_s=complex(b_cw),
        b_ccw_s=complex(b_ccw), q_s=g * i_a, p_s=0.0, i_a_s=float(i_a), i_b_s=float(i_b),
        delta_tilde_a=complex(dt), f_factor=complex(f),
        g_factor=float(eps ** 2 / abs(den) ** 2),
    )


def intensity_closed_form(params: SystemParams, port, eps: float) -> float:
    """I_A^s = g (|Delta~_A|^2 + |eta + F e^{+-i phi}|^2), + for port 1."""
    port = Port.parse(port)
    s = steady_state(params, port, eps)
    sign = 1.0 if port is Port.PORT1 else -1.0
    u = params.eta + s.f_factor * np.exp(sign * 1j * params.phi)
    return float(s.g_factor * (abs(s.delta_tilde_a) ** 2 + abs(u) ** 2))


def delta_intensity_steady(params: SystemParams, eps: float) -> float:
    """I_A^s(port 1) - I_A^s(port 2) = g (|eta + F e^{i phi}|^2 - |eta + F e^{-i phi}|^2)."""
    s = steady_state(params, Port.PORT1, eps)
    up = params.eta + s.f_factor * np.exp(1j * params.phi)
    um = params.eta + s.f_factor * np.exp(-1j * params.phi)
    return float(s.g_factor * (abs(up) ** 2 - abs(um) ** 2))


def steady_residual(params: SystemParams, sol: SteadySolution, port, eps: float,
                    include_self_shift: bool = False) -> float:
    """Largest |rhs| of the stationary equations relative to the largest term.

    With ``include_self_shift=False`` the optical detuning uses Delta_A
    (the same G^2 omission as the closed form)."""
    pr = params
    port = Port.parse(port)
    e1 = eps if port is Port.PORT1 else 0.0
    e2 = eps if port is Port.PORT2 else 0.0
    gq = pr.g_om * sol.q_s if include_self_shift else 0.0
    za = pr.delta_a - gq - 1j * pr.kappa
    zb = pr.delta_b - 1j * pr.gamma
    a1, a2, b1, b2 = sol.a_cw_s, sol.a_ccw_s, sol.b_cw_s, sol.b_ccw_s
    terms = [
        (-1j * za * a1, 1j * pr.eta * a2, 1j * pr.j_coupling * b2, e1),
        (-1j * za * a2, 1j * pr.eta * a1, 1j * pr.j_coupling * b1, e2),
        (-1j * zb * b1, 1j * pr.xi_mag * np.exp(1j * pr.phi) * b2, 1j * pr.j_coupling * a2),
        (-1j * zb * b2, 1j * pr.xi_mag * np.exp(-1j * pr.phi) * b1, 1j * pr.j_coupling * a1),
        (sol.p_s,),
        (-sol.q_s, pr.g_om * sol.i_a_s, -pr.gamma_m * sol.p_s),
    ]
    worst = 0.0
    for row in terms:
        scale = max(abs(t) for t in row)
        if scale == 0.0:
            continue
        worst = max(worst, abs(sum(row)) / scale)
    return worst


# ---------------------------------------------------------------------------
# tips


def polarizability(radius: float, n_sq: float) -> float:
    """Polarisability volume 4 pi R^3 (n^2 - 1)/(n^2 + 2) of a sphere, m^3."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not n_sq > 0:
        raise ValueError("n_sq must be positive")
    return 4.0 * math.pi * radius ** 3 * (n_sq - 1.0) / (n_sq + 2.0)


@dataclass(frozen=True)
class TipConfig:
    """Two-tip geometry on resonator B (SI units).  Defaults follow the
    device constants used throughout (n^2 = 3.9, f = 0.3, V_B = 200 um^3,
    omega_B = 2 pi x 190 THz, v = 3e8 m/s)."""

    r1: float = 40e-9
    r2: float = 40e-9
    n1_sq: float = 3.9
    n2_sq: float = 3.9
    beta: float = 0.0
    azimuthal_n: int = 1
    f1: float = 0.3
    f2: float = 0.3
    v_b: float = 200e-18
    omega_b: float = 2.0 * math.pi * 190e12
    xi0: float = 0.0
    v_light: float = 3e8

    def __post_init__(self):
        for name in ("r1", "r2", "n1_sq", "n2_sq", "v_b", "omega_b", "v_light"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def with_(self, **changes) -> "TipConfig":
        return replace(self, **changes)


@dataclass
class TipDerived:
    """Tip-induced quantities in rad/s (``normalized`` divides by Omega)."""

    xi_mag: float
    phi: float
    delta_shift: float
    gamma_t: float
    zeta_mag: float
    theta_cap: float

    def normalized(self, omega: float = OMEGA_DEFAULT) -> "TipDerived":
        return TipDerived(self.xi_mag / omega, self.phi, self.delta_shift / omega,
                          self.gamma_t / omega, self.zeta_mag / omega, self.theta_cap)


def tip_map(config: TipConfig) -> TipDerived:
    c = config
    chi1 = polarizability(c.r1, c.n1_sq)
    chi2 = polarizability(c.r2, c.n2_sq)
    w1 = chi1 * c.f1 ** 2
    w2 = chi2 * c.f2 ** 2
    phase = np.exp(1j * 2.0 * c.azimuthal_n * c.beta)
    xi = c.xi0 + c.omega_b * (w1 + w2 * phase) / (2.0 * c.v_b)
    delta = c.omega_b * (w1 + w2) / (2.0 * c.v_b)
    rad = c.omega_b ** 4 / (12.0 * math.pi * c.v_light ** 3 * c.v_b)
    zeta = rad * (chi1 * w1 + chi2 * w2 * phase)
    gamma_t = rad * (chi1 * w1 + chi2 * w2)
    return TipDerived(float(abs(xi)), float(np.angle(xi)), float(delta), float(gamma_t),
                      float(abs(zeta)), float(np.angle(zeta)))


def achievable_region(base: TipConfig, r1_range: tuple[float, float],
                      r2_range: tuple[float, float], beta_range: tuple[float, float],
                      counts: tuple[int, int, int] = (16, 16, 64),
                      omega: float = OMEGA_DEFAULT) -> np.ndarray:
    """Image of the tip map over a uniform (R1, R2, beta) grid.

    Returns an (n, 2) array of (|xi|/Omega, phi) in row-major grid order.
    """
    r1, r2, beta = _tip_grid(base, r1_range, r2_range, beta_range, counts)
    chi1 = 4.0 * np.pi * r1 ** 3 * (base.n1_sq - 1.0) / (base.n1_sq + 2.0)
    chi2 = 4.0 * np.pi * r2 ** 3 * (base.n2_sq - 1.0) / (base.n2_sq + 2.0)
    xi = base.xi0 + base.omega_b * (chi1 * base.f1 ** 2 + chi2 * base.f2 ** 2
                                    * np.exp(2j * base.azimuthal_n * beta)) / (2.0 * base.v_b)
    return np.column_stack([np.abs(xi).ravel() / omega, np.angle(xi).ravel()])


def _tip_grid(base: TipConfig, r1_range, r2_range, beta_range, counts):
    arrays = []
    for (lo, hi), n in zip((r1_range, r2_range, beta_range), counts):
        if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
            raise ValueError("empty or invalid range")
        arrays.append(np.linspace(lo, hi, n) if n > 1 else np.array([lo]))
    return np.meshgrid(*arrays, indexing="ij")


def tip_scale_ratios(base: TipConfig, r1_range, r2_range, beta_range,
                     counts=(16, 16, 64)) -> dict:
    """Worst-case ratios of the coherent tip terms (|xi|, delta) to the
    radiative ones (|zeta|, gamma_t) over a (R1, R2, beta) grid.

    ``combined`` is min over the grid of min(|xi|, delta) / max(|zeta|, gamma_t);
    ``xi_zeta`` and ``delta_gamma`` compare like with like.
    """
    r1, r2, beta = _tip_grid(base, r1_range, r2_range, beta_range, counts)
    chi1 = 4.0 * np.pi * r1 ** 3 * (base.n1_sq - 1.0) / (base.n1_sq + 2.0)
    chi2 = 4.0 * np.pi * r2 ** 3 * (base.n2_sq - 1.0) / (base.n2_sq + 2.0)
    w1 = chi1 * base.f1 ** 2
    w2 = chi2 * base.f2 ** 2
    phase = np.exp(2j * base.azimuthal_n * beta)
    xi = np.abs(base.xi0 + base.omega_b * (w1 + w2 * phase) / (2.0 * base.v_b))
    delta = base.omega_b * (w1 + w2) / (2.0 * base.v_b)
    rad = base.omega_b ** 4 / (12.0 * math.pi * base.v_light ** 3 * base.v_b)
    zeta = np.abs(rad * (chi1 * w1 + chi2 * w2 * phase))
    gamma_t = rad * (chi1 * w1 + chi2 * w2)
    with np.errstate(divide="ignore", invalid="ignore"):
        xz = np.where(zeta > 0, xi / zeta, np.inf)
    return {"combined": float(np.min(np.minimum(xi, delta) / np.maximum(zeta, gamma_t))),
            "xi_zeta": float(np.min(xz)),
            "delta_gamma": float(np.min(delta / gamma_t))}


def tip_scale_separation(base: TipConfig, r1_range, r2_range, beta_range,
                         counts=(16, 16, 64)) -> float:
    """min over the grid of min(|xi|, delta) / max(|zeta|, gamma_t)."""
    return tip_scale_ratios(base, r1_range, r2_range, beta_range, counts)["combined"]


def region_mask(points: np.ndarray, xi_edges: np.ndarray, phi_edges: np.ndarray) -> np.ndarray:
    """Occupancy of a fixed (|xi|/Omega, phi) raster by the mapped points."""
    h, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=[xi_edges, phi_edges])
    return h > 0


def region_boundary(points: np.ndarray, n_phi_bins: int = 72,
                    phi_range: tuple[float, float] = (-math.pi, math.pi)) -> np.ndarray:
    """Radial envelope of the region: for each phi bin, the min and max
    |xi|/Omega reached.  Rows are (phi_center, xi_min, xi_max); empty bins are NaN."""
    edges = np.linspace(phi_range[0], phi_range[1], n_phi_bins + 1)
    idx = np.clip(np.digitize(points[:, 1], edges) - 1, 0, n_phi_bins - 1)
    out = np.full((n_phi_bins, 3), np.nan)
    out[:, 0] = 0.5 * (edges[:-1] + edges[1:])
    for k in range(n_phi_bins):
        sel = points[idx == k, 0]
        if len(sel):
            out[k, 1] = sel.min()
            out[k, 2] = sel.max()
    return out


def _boundary_xy(boundary: np.ndarray) -> np.ndarray:
    ok = ~np.isnan(boundary[:, 2])
    ph = boundary[ok, 0]
    curves = [np.column_stack([boundary[ok, c] * np.cos(ph), boundary[ok, c] * np.sin(ph)])
              for c in (1, 2)]
    return np.vstack(curves)


def boundary_shift(points_a: np.ndarray, points_b: np.ndarray, n_phi_bins: int = 72) -> float:
    """Hausdorff distance between the two regions' boundary envelopes (in the
    |xi| e^{i phi} plane), relative to the diameter of the second region."""
    a = _boundary_xy(region_boundary(points_a, n_phi_bins))
    b = _boundary_xy(region_boundary(points_b, n_phi_bins))
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    haus = max(d.min(axis=1).max(), d.min(axis=0).max())
    diam = np.linalg.norm(b[:, None, :] - b[None, :, :], axis=2).max()
    return float(haus / diam) if diam > 0 else 0.0


def write_region_csv(points: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["xi_over_omega", "phi"])
        for x, p in points:
            w.writerow([repr(float(x)), repr(float(p))])
    return path
