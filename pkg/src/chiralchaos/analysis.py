"""Bifurcation extrema, spectra, phase labels and the S/C structural metrics."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import IntegrationConfig, Trajectory, integrate, max_intensity
from .lyapunov import LyapunovConfig, max_lyapunov


class Phase(str, enum.Enum):
    STATIONARY = "Stationary"
    SELF_OSCILLATION = "SelfOscillation"
    PERIOD_DOUBLING = "PeriodDoubling"
    CHAOS = "Chaos"

    @property
    def is_chaotic(self) -> bool:
        return self is Phase.CHAOS


@dataclass(frozen=True)
class Thresholds:
    """Classifier constants.  ``cluster_eps`` is relative to the largest
    extremum magnitude; ``var_eps`` is relative to max(1, mean(q)^2)."""

    lambda_chaos_tol: float = 0.01
    cluster_eps: float = 1e-3
    var_eps: float = 1e-12
    flatness_chaos: float = 0.2
    flatness_band: float = 8.0
    n_chaos_clusters: int = 50

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PhaseLabel:
    label: Phase
    lambda_max: float
    n_clusters: int
    flatness: float = float("nan")
    flags: tuple[str, ...] = ()

    @property
    def is_chaotic(self) -> bool:
        return self.label.is_chaotic


@dataclass
class BifurcationSlice:
    control_value: float
    extrema: np.ndarray


@dataclass
class LyapunovSpectrumPair:
    controls: np.ndarray
    lambda_1: np.ndarray
    lambda_2: np.ndarray = field(default=None)

    def __post_init__(self):
        self.controls = np.asarray(self.controls, dtype=np.float64)
        self.lambda_1 = np.asarray(self.lambda_1, dtype=np.float64)
        self.lambda_2 = np.asarray(self.lambda_2, dtype=np.float64)
        if not (len(self.controls) == len(self.lambda_1) == len(self.lambda_2)):
            raise ValueError("controls, lambda_1 and lambda_2 must have equal length")
        if len(self.controls) > 2:
            d = np.diff(self.controls)
            if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12 * max(1.0, abs(d[0]))):
                raise ValueError("controls must be uniformly spaced")


# ---------------------------------------------------------------------------
# bifurcation extrema


def _series(obj, attr: str = "q") -> np.ndarray:
    if isinstance(obj, Trajectory):
        return getattr(obj, attr)
    return np.asarray(obj, dtype=np.float64)


def local_maxima(series) -> np.ndarray:
    """Strict discrete local maxima, refined by a parabola through the three
    samples around each peak (sampling error otherwise rivals cluster_eps)."""
    y = np.asarray(series, dtype=np.float64)
    if len(y) < 3:
        return np.empty(0)
    mid = y[1:-1]
    left = y[:-2]
    right = y[2:]
    idx = np.nonzero((mid > left) & (mid > right))[0]
    ym, y0, yp = left[idx], mid[idx], right[idx]
    denom = ym - 2.0 * y0 + yp
    with np.errstate(divide="ignore", invalid="ignore"):
        refined = y0 - 0.125 * (yp - ym) ** 2 / denom
    return np.where(denom < 0, refined, y0)


def cluster_values(values, rel_eps: float = 1e-3) -> np.ndarray:
    """Group sorted values into clusters no wider than ``rel_eps * max|v|``;
    returns the cluster means."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if len(v) == 0:
        return v
    eps = rel_eps * float(np.max(np.abs(v)))
    centers = []
    start = 0
    for i in range(1, len(v) + 1):
        if i == len(v) or v[i] - v[start] > eps:
            centers.append(float(np.mean(v[start:i])))
            start = i
    return np.array(centers)


def extract_extrema(trajectory, rel_eps: float | None = None) -> np.ndarray:
    """Local maxima of q over the recorded window.  With ``rel_eps`` given,
    near-equal maxima are merged and the cluster centres returned."""
    q = _series(trajectory)
    if len(q) == 0:
        raise ValueError("empty trajectory")
    if len(q) < 3:
        raise ValueError("need at least 3 samples to locate maxima")
    peaks = local_maxima(q)
    if rel_eps is None:
        return peaks
    return cluster_values(peaks, rel_eps)


def bifurcation_slice(control_value: float, trajectory) -> BifurcationSlice:
    return BifurcationSlice(float(control_value), extract_extrema(trajectory))


# ---------------------------------------------------------------------------
# spectra


def power_spectrum(series, sample_dt: float, taus=None) -> tuple[np.ndarray, np.ndarray]:
    """DFT magnitudes of the mean-removed series.

    Frequencies are angular, in units of the mechanical frequency, so the
    n-th harmonic of Omega sits at n.  ``taus``, when given, is checked for
    uniform spacing at ``sample_dt``.
    """
    y = np.asarray(series, dtype=np.float64)
    if len(y) < 256:
        raise ValueError(f"series too short for a spectrum ({len(y)} < 256)")
    if not (sample_dt > 0):
        raise ValueError("sample_dt must be positive")
    if taus is not None:
        d = np.diff(np.asarray(taus, dtype=np.float64))
        if len(d) != len(y) - 1 or not np.allclose(d, sample_dt, rtol=1e-8, atol=0):
            raise ValueError("series is not uniformly sampled at sample_dt")
    mags = np.abs(np.fft.rfft(y - y.mean()))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(len(y), sample_dt)
    return freqs, mags


def spectral_flatness(freqs, mags, band: float = 8.0) -> float:
    """Geometric over arithmetic mean of the magnitudes in (0, band]."""
    freqs = np.asarray(freqs)
    m = np.asarray(mags)[(freqs > 0) & (freqs <= band)]
    if len(m) == 0:
        raise ValueError("no spectral bins inside the band")
    am = float(np.mean(m))
    if am == 0.0:
        return 0.0
    with np.errstate(divide="ignore"):
        gm = float(np.exp(np.mean(np.log(m))))
    return gm / am


def spectral_peaks(freqs, mags, rel_height: float = 1e-2) -> np.ndarray:
    """Frequencies of local maxima of the magnitude spectrum above
    ``rel_height`` times the global maximum."""
    m = np.asarray(mags)
    f = np.asarray(freqs)
    if len(m) < 3:
        return np.empty(0)
    thr = rel_height * m.max()
    inner = (m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:]) & (m[1:-1] > thr)
    return f[1:-1][inner]


# ---------------------------------------------------------------------------
# classification


def classify(trajectory: Trajectory, lambda_max: float,
             thresholds: Thresholds | None = None) -> PhaseLabel:
    th = thresholds or Thresholds()
    q = trajectory.q
    if len(q) == 0:
        raise ValueError("empty trajectory")
    scale = max(1.0, float(np.mean(q)) ** 2)
    if float(np.var(q)) < th.var_eps * scale:
        flags = ("positive_lambda_on_stationary_state",) if lambda_max > th.lambda_chaos_tol else ()
        return PhaseLabel(Phase.STATIONARY, float(lambda_max), 0, 0.0, flags)

    clusters = extract_extrema(q, th.cluster_eps)
    n_clusters = len(clusters)
    flat = float("nan")
    if len(q) >= 256 and len(trajectory) > 1:
        freqs, mags = power_spectrum(q, trajectory.sample_dt)
        flat = spectral_flatness(freqs, mags, th.flatness_band)

    if lambda_max > th.lambda_chaos_tol:
        flags = ()
        if not (flat > th.flatness_chaos):
            flags = ("discrete_spectrum",)
        return PhaseLabel(Phase.CHAOS, float(lambda_max), n_clusters, flat, flags)
    if n_clusters <= 1:
        label = Phase.SELF_OSCILLATION
    else:
        label = Phase.PERIOD_DOUBLING
    return PhaseLabel(label, float(lambda_max), n_clusters, flat)


# ---------------------------------------------------------------------------
# structural metrics


def _pair_arrays(pair_or_l1, l2=None) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pair_or_l1, LyapunovSpectrumPair):
        a, b = pair_or_l1.lambda_1, pair_or_l1.lambda_2
    else:
        a = np.asarray(pair_or_l1, dtype=np.float64)
        b = np.asarray(l2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if len(a) == 0:
        raise ValueError("metric needs N >= 1")
    return a, b


def _dissimilarity(a: np.ndarray, b: np.ndarray) -> float:
    num = np.abs(a - b)
    den = np.abs(a) + np.abs(b)
    # 0/0 (both exponents exactly zero) counts as identical
    terms = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return float(np.mean(terms))


def metric_S(pair_or_l1, l2=None) -> float:
    """Symmetry between two lambda_max arrays on the same control grid."""
    a, b = _pair_arrays(pair_or_l1, l2)
    return 1.0 - _dissimilarity(a, b)


def metric_C(pair_or_l1, l2=None) -> float:
    """Chirality: like S but against the order-reversed second array."""
    a, b = _pair_arrays(pair_or_l1, l2)
    return 1.0 - _dissimilarity(a, b[::-1])


# ---------------------------------------------------------------------------
# one-shot observation of a parameter point


@dataclass
class Observation:
    """Phase label plus the intensity statistic used by the sensing criteria."""

    phase: PhaseLabel
    i_a_max: float
    trajectory: Trajectory | None = None

    @property
    def is_chaotic(self) -> bool:
        return self.phase.is_chaotic


def observe(params, drive, integration=None, lyapunov=None, thresholds: Thresholds | None = None,
            keep_trajectory: bool = False) -> Observation:
    """Integrate (transient + record) from rest, then estimate lambda_max from
    the final recorded state and classify.

    The tangent run continues the same orbit: the drive phase is advanced by
    d_omega * tau_end so a modulated envelope stays continuous.
    """
    icfg = integration or IntegrationConfig()
    lcfg = lyapunov or LyapunovConfig(integration=icfg)
    traj = integrate(params, drive, icfg)
    tau_end = float(traj.taus[-1])
    cont = drive.with_(theta=drive.theta + drive.d_omega * tau_end)
    lcfg = lcfg.with_(integration=lcfg.integration.with_(t_transient=0.0))
    est = max_lyapunov(params, cont, lcfg, initial=traj.final)
    label = classify(traj, est.lambda_max, thresholds)
    return Observation(label, max_intensity(traj), traj if keep_trajectory else None)

