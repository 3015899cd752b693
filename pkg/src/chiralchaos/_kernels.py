"""Compiled inner loops for the coupled-resonator equations of motion.

Everything here works on flat float64 arrays so that numba can compile it.
Layouts are fixed:

* state ``x`` (10,): Re/Im a_cw, Re/Im a_ccw, Re/Im b_cw, Re/Im b_ccw, q, p
* params ``pr`` (10,): delta_a, delta_b, kappa, gamma, g_om, gamma_m, eta,
  xi_mag, phi, j_coupling
* drive ``dr`` (5,): port (1.0 or 2.0), eps, d_eps, d_omega, theta

Status codes returned by the loops: 0 ok, 1 diverged, 2 step underflow.
"""
import numpy as np
from numba import njit

OK = 0
DIVERGED = 1
UNDERFLOW = 2

# state magnitudes beyond this are treated as a blow-up
BLOWUP = 1e150


@njit(cache=True)
def drive_envelope(dr, tau):
    env = dr[1] + 0j
    if dr[2] != 0.0:
        ph = dr[3] * tau + dr[4]
        env += dr[2] * (np.cos(ph) - 1j * np.sin(ph))
    return env


@njit(cache=True)
def rhs(x, pr, dr, tau, out):
    da = pr[0]
    db = pr[1]
    kappa = pr[2]
    gamma = pr[3]
    g = pr[4]
    gm = pr[5]
    eta = pr[6]
    xi = pr[7]
    phi = pr[8]
    jc = pr[9]

    a_cw = x[0] + 1j * x[1]
    a_ccw = x[2] + 1j * x[3]
    b_cw = x[4] + 1j * x[5]
    b_ccw = x[6] + 1j * x[7]
    q = x[8]
    p = x[9]

    env = drive_envelope(dr, tau)
    e1 = env if dr[0] == 1.0 else 0j
    e2 = env if dr[0] == 2.0 else 0j

    ca = -1j * (da - 1j * kappa) + 1j * g * q
    cb = -1j * (db - 1j * gamma)
    xp = 1j * xi * (np.cos(phi) + 1j * np.sin(phi))
    xm = 1j * xi * (np.cos(phi) - 1j * np.sin(phi))

    d_acw = ca * a_cw + 1j * eta * a_ccw + 1j * jc * b_ccw + e1
    d_accw = ca * a_ccw + 1j * eta * a_cw + 1j * jc * b_cw + e2
    d_bcw = cb * b_cw + xp * b_ccw + 1j * jc * a_ccw
    d_bccw = cb * b_ccw + xm * b_cw + 1j * jc * a_cw

    out[0] = d_acw.real
    out[1] = d_acw.imag
    out[2] = d_accw.real
    out[3] = d_accw.imag
    out[4] = d_bcw.real
    out[5] = d_bcw.imag
    out[6] = d_bccw.real
    out[7] = d_bccw.imag
    out[8] = p
    out[9] = -q + g * ((x[0] * x[0] + x[1] * x[1]) + (x[2] * x[2] + x[3] * x[3])) - gm * p


@njit(cache=True)
def jvp(x, v, pr, out):
    """Jacobian of ``rhs`` at ``x`` applied to ``v`` (drive does not enter)."""
    da = pr[0]
    db = pr[1]
    kappa = pr[2]
    gamma = pr[3]
    g = pr[4]
    gm = pr[5]
    eta = pr[6]
    xi = pr[7]
    phi = pr[8]
    jc = pr[9]

    a_cw = x[0] + 1j * x[1]
    a_ccw = x[2] + 1j * x[3]
    q = x[8]
    va_cw = v[0] + 1j * v[1]
    va_ccw = v[2] + 1j * v[3]
    vb_cw = v[4] + 1j * v[5]
    vb_ccw = v[6] + 1j * v[7]
    vq = v[8]
    vp = v[9]

    ca = -1j * (da - 1j * kappa) + 1j * g * q
    cb = -1j * (db - 1j * gamma)
    xp = 1j * xi * (np.cos(phi) + 1j * np.sin(phi))
    xm = 1j * xi * (np.cos(phi) - 1j * np.sin(phi))

    d_acw = ca * va_cw + 1j * g * a_cw * vq + 1j * eta * va_ccw + 1j * jc * vb_ccw
    d_accw = ca * va_ccw + 1j * g * a_ccw * vq + 1j * eta * va_cw + 1j * jc * vb_cw
    d_bcw = cb * vb_cw + xp * vb_ccw + 1j * jc * va_ccw
    d_bccw = cb * vb_ccw + xm * vb_cw + 1j * jc * va_cw

    out[0] = d_acw.real
    out[1] = d_acw.imag
    out[2] = d_accw.real
    out[3] = d_accw.imag
    out[4] = d_bcw.real
    out[5] = d_bcw.imag
    out[6] = d_bccw.real
    out[7] = d_bccw.imag
    out[8] = vp
    out[9] = (-vq + 2.0 * g * ((x[0] * v[0] + x[1] * v[1]) + (x[2] * v[2] + x[3] * v[3]))
              - gm * vp)


@njit(cache=True)
def _bad(x):
    for i in range(x.shape[0]):
        if not np.isfinite(x[i]) or abs(x[i]) > BLOWUP:
            return True
    return False


# ---------------------------------------------------------------------------
# fixed-step RK4


@njit(cache=True)
def _rk4_step(x, pr, dr, tau, h, k1, k2, k3, k4, tmp):
    n = x.shape[0]
    rhs(x, pr, dr, tau, k1)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k1[i]
    rhs(tmp, pr, dr, tau + 0.5 * h, k2)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k2[i]
    rhs(tmp, pr, dr, tau + 0.5 * h, k3)
    for i in range(n):
        tmp[i] = x[i] + h * k3[i]
    rhs(tmp, pr, dr, tau + h, k4)
    for i in range(n):
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def rk4_trajectory(x0, pr, dr, h, n_transient, n_samples, every):
    """Run ``n_transient`` unrecorded steps, then record ``n_samples`` states
    spaced ``every`` steps apart (the first sample is the post-transient state).

    Returns (states, status, step_index_of_failure).
    """
    x = x0.copy()
    k1 = np.empty(10)
    k2 = np.empty(10)
    k3 = np.empty(10)
    k4 = np.empty(10)
    tmp = np.empty(10)
    states = np.zeros((n_samples, 10))
    for i in range(n_transient):
        _rk4_step(x, pr, dr, i * h, h, k1, k2, k3, k4, tmp)
        if _bad(x):
            return states, DIVERGED, i + 1
    step = n_transient
    for s in range(n_samples):
        if s > 0:
            for _ in range(every):
                _rk4_step(x, pr, dr, step * h, h, k1, k2, k3, k4, tmp)
                step += 1
                if _bad(x):
                    return states, DIVERGED, step
        states[s, :] = x
    return states, OK, step


@njit(cache=True)
def _rk4_tangent_step(x, v, pr, dr, tau, h, k, l, tx, tv):
    n = x.shape[0]
    rhs(x, pr, dr, tau, k[0])
    jvp(x, v, pr, l[0])
    for i in range(n):
        tx[i] = x[i] + 0.5 * h * k[0, i]
        tv[i] = v[i] + 0.5 * h * l[0, i]
    rhs(tx, pr, dr, tau + 0.5 * h, k[1])
    jvp(tx, tv, pr, l[1])
    for i in range(n):
        tx[i] = x[i] + 0.5 * h * k[1, i]
        tv[i] = v[i] + 0.5 * h * l[1, i]
    rhs(tx, pr, dr, tau + 0.5 * h, k[2])
    jvp(tx, tv, pr, l[2])
    for i in range(n):
        tx[i] = x[i] + h * k[2, i]
        tv[i] = v[i] + h * l[2, i]
    rhs(tx, pr, dr, tau + h, k[3])
    jvp(tx, tv, pr, l[3])
    for i in range(n):
        x[i] += h / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
        v[i] += h / 6.0 * (l[0, i] + 2.0 * l[1, i] + 2.0 * l[2, i] + l[3, i])


@njit(cache=True)
def rk4_lyapunov(x0, v0, pr, dr, h, n_transient, n_renorm, every):
    """Tangent-space stretch factors with renormalisation every ``every`` steps.

    Returns (log_stretch[n_renorm], final_state, status, failed_step).
    """
    x = x0.copy()
    v = v0.copy()
    k = np.empty((4, 10))
    l = np.empty((4, 10))
    tx = np.empty(10)
    tv = np.empty(10)
    logs = np.zeros(n_renorm)
    for i in range(n_transient):
        _rk4_step(x, pr, dr, i * h, h, k[0], k[1], k[2], k[3], tx)
        if _bad(x):
            return logs, x, DIVERGED, i + 1
    step = n_transient
    for r in range(n_renorm):
        for _ in range(every):
            _rk4_tangent_step(x, v, pr, dr, step * h, h, k, l, tx, tv)
            step += 1
        if _bad(x):
            return logs, x, DIVERGED, step
        nrm = np.sqrt(np.sum(v * v))
        logs[r] = np.log(nrm)
        for i in range(10):
            v[i] /= nrm
    return logs, x, OK, step


# ---------------------------------------------------------------------------
# adaptive Dormand-Prince 5(4)

C2 = 1.0 / 5.0
C3 = 3.0 / 10.0
C4 = 4.0 / 5.0
C5 = 8.0 / 9.0
A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

MIN_STEP = 1e-12


@njit(cache=True)
def _dp_stages(x, pr, dr, tau, h, k, tmp, xn):
    """Fill ``k`` with the seven stages for a step of size h from x (k[0] must
    already hold f(x)). ``xn`` receives the 5th-order solution."""
    n = x.shape[0]
    for i in range(n):
        tmp[i] = x[i] + h * A21 * k[0, i]
    rhs(tmp, pr, dr, tau + C2 * h, k[1])
    for i in range(n):
        tmp[i] = x[i] + h * (A31 * k[0, i] + A32 * k[1, i])
    rhs(tmp, pr, dr, tau + C3 * h, k[2])
    for i in range(n):
        tmp[i] = x[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
    rhs(tmp, pr, dr, tau + C4 * h, k[3])
    for i in range(n):
        tmp[i] = x[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i] + A54 * k[3, i])
    rhs(tmp, pr, dr, tau + C5 * h, k[4])
    for i in range(n):
        tmp[i] = x[i] + h * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i]
                             + A64 * k[3, i] + A65 * k[4, i])
    rhs(tmp, pr, dr, tau + h, k[5])
    for i in range(n):
        xn[i] = x[i] + h * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i]
                            + B5 * k[4, i] + B6 * k[5, i])
    rhs(xn, pr, dr, tau + h, k[6])


@njit(cache=True)
def _dp_error(x, xn, k, h, rtol, atol):
    # max-norm keeps the error estimate independent of component ordering,
    # which preserves the CW/CCW swap symmetry exactly
    err = 0.0
    for i in range(x.shape[0]):
        e = h * (E1 * k[0, i] + E3 * k[2, i] + E4 * k[3, i] + E5 * k[4, i]
                 + E6 * k[5, i] + E7 * k[6, i])
        sc = atol + rtol * max(abs(x[i]), abs(xn[i]))
        r = abs(e) / sc
        if r > err:
            err = r
    return err


@njit(cache=True)
def _dp_advance(x, pr, dr, tau, t_end, h, rtol, atol, k, tmp, xn):
    """Advance x in place from tau to exactly t_end. Returns (h_next, status)."""
    rhs(x, pr, dr, tau, k[0])
    while tau < t_end:
        last = False
        if tau + h >= t_end:
            h_try = t_end - tau
            last = True
        else:
            h_try = h
        _dp_stages(x, pr, dr, tau, h_try, k, tmp, xn)
        err = _dp_error(x, xn, k, h_try, rtol, atol)
        if err <= 1.0 and np.isfinite(err):
            tau = t_end if last else tau + h_try
            for i in range(10):
                x[i] = xn[i]
                k[0, i] = k[6, i]
            if _bad(x):
                return h, DIVERGED, tau
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            # a step clipped to hit a sample time says little about the next h
            if not (last and h_try < h):
                h = h_try * fac
        else:
            if not np.isfinite(err):
                fac = 0.1
            else:
                fac = max(0.1, 0.9 * err ** -0.25)
            h = h_try * fac
            if h < MIN_STEP:
                return h, UNDERFLOW, tau
    return h, OK, tau


@njit(cache=True)
def dp_trajectory(x0, pr, dr, h0, rtol, atol, t_transient, sample_dt, n_samples):
    x = x0.copy()
    k = np.empty((7, 10))
    tmp = np.empty(10)
    xn = np.empty(10)
    states = np.zeros((n_samples, 10))
    h = h0
    tau = 0.0
    if t_transient > 0.0:
        h, st, tau = _dp_advance(x, pr, dr, 0.0, t_transient, h, rtol, atol, k, tmp, xn)
        if st != OK:
            return states, st, tau
    tau = t_transient
    for s in range(n_samples):
        if s > 0:
            t_next = t_transient + s * sample_dt
            h, st, tau = _dp_advance(x, pr, dr, tau, t_next, h, rtol, atol, k, tmp, xn)
            if st != OK:
                return states, st, tau
            tau = t_next
        states[s, :] = x
    return states, OK, tau


@njit(cache=True)
def _dp_aug_stage(x, v, k, l, h, row, c0, c1, c2, c3, c4, tmp, tv):
    for i in range(10):
        tmp[i] = x[i] + h * (c0 * k[0, i] + c1 * k[1, i] + c2 * k[2, i] + c3 * k[3, i]
                             + c4 * k[4, i])
        tv[i] = v[i] + h * (c0 * l[0, i] + c1 * l[1, i] + c2 * l[2, i] + c3 * l[3, i]
                            + c4 * l[4, i])


@njit(cache=True)
def _dp_tangent_advance(x, v, pr, dr, tau, t_end, h, rtol, atol, k, l, tmp, tv, xn, vn):
    """Adaptive step on the augmented (state, tangent) system; the error norm
    covers both so that the tangent dynamics are resolved near fixed points."""
    rhs(x, pr, dr, tau, k[0])
    jvp(x, v, pr, l[0])
    while tau < t_end:
        last = False
        if tau + h >= t_end:
            h_try = t_end - tau
            last = True
        else:
            h_try = h
        _dp_aug_stage(x, v, k, l, h_try, 1, A21, 0.0, 0.0, 0.0, 0.0, tmp, tv)
        rhs(tmp, pr, dr, tau + C2 * h_try, k[1])
        jvp(tmp, tv, pr, l[1])
        _dp_aug_stage(x, v, k, l, h_try, 2, A31, A32, 0.0, 0.0, 0.0, tmp, tv)
        rhs(tmp, pr, dr, tau + C3 * h_try, k[2])
        jvp(tmp, tv, pr, l[2])
        _dp_aug_stage(x, v, k, l, h_try, 3, A41, A42, A43, 0.0, 0.0, tmp, tv)
        rhs(tmp, pr, dr, tau + C4 * h_try, k[3])
        jvp(tmp, tv, pr, l[3])
        _dp_aug_stage(x, v, k, l, h_try, 4, A51, A52, A53, A54, 0.0, tmp, tv)
        rhs(tmp, pr, dr, tau + C5 * h_try, k[4])
        jvp(tmp, tv, pr, l[4])
        _dp_aug_stage(x, v, k, l, h_try, 5, A61, A62, A63, A64, A65, tmp, tv)
        rhs(tmp, pr, dr, tau + h_try, k[5])
        jvp(tmp, tv, pr, l[5])
        for i in range(10):
            xn[i] = x[i] + h_try * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i]
                                    + B5 * k[4, i] + B6 * k[5, i])
            vn[i] = v[i] + h_try * (B1 * l[0, i] + B3 * l[2, i] + B4 * l[3, i]
                                    + B5 * l[4, i] + B6 * l[5, i])
        rhs(xn, pr, dr, tau + h_try, k[6])
        jvp(xn, vn, pr, l[6])
        err = max(_dp_error(x, xn, k, h_try, rtol, atol),
                  _dp_error(v, vn, l, h_try, rtol, atol))
        if err <= 1.0 and np.isfinite(err):
            tau = t_end if last else tau + h_try
            for i in range(10):
                x[i] = xn[i]
                v[i] = vn[i]
                k[0, i] = k[6, i]
                l[0, i] = l[6, i]
            if _bad(x):
                return h, DIVERGED, tau
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            if not (last and h_try < h):
                h = h_try * fac
        else:
            if not np.isfinite(err):
                fac = 0.1
            else:
                fac = max(0.1, 0.9 * err ** -0.25)
            h = h_try * fac
            if h < MIN_STEP:
                return h, UNDERFLOW, tau
    return h, OK, tau


@njit(cache=True)
def dp_lyapunov(x0, v0, pr, dr, h0, rtol, atol, t_transient, t_renorm, n_renorm):
    x = x0.copy()
    v = v0.copy()
    # zero-filled: unused stage slots are multiplied by 0.0
    k = np.zeros((7, 10))
    l = np.zeros((7, 10))
    tmp = np.empty(10)
    tv = np.empty(10)
    xn = np.empty(10)
    vn = np.empty(10)
    logs = np.zeros(n_renorm)
    h = h0
    tau = 0.0
    if t_transient > 0.0:
        h, st, tau = _dp_advance(x, pr, dr, 0.0, t_transient, h, rtol, atol, k, tmp, xn)
        if st != OK:
            return logs, x, st, tau
    tau = t_transient
    for r in range(n_renorm):
        t_next = t_transient + (r + 1) * t_renorm
        h, st, tau = _dp_tangent_advance(x, v, pr, dr, tau, t_next, h, rtol, atol,
                                         k, l, tmp, tv, xn, vn)
        if st != OK:
            return logs, x, st, tau
        tau = t_next
        nrm = np.sqrt(np.sum(v * v))
        logs[r] = np.log(nrm)
        for i in range(10):
            v[i] /= nrm
    return logs, x, OK, tau
