import math

import numpy as np
import pytest

from chiralchaos.integrator import IntegrationConfig
from chiralchaos.lyapunov import LyapunovConfig
from chiralchaos.model import StateVector
from chiralchaos.sensing import SensingConfig

TWO_PI = 2.0 * math.pi

# short fixed-step runs for unit tests
FAST = IntegrationConfig(method="rk4", t_transient=40 * TWO_PI, t_record=40 * TWO_PI)
FAST_LYAP = LyapunovConfig(integration=FAST, t_average=80 * TWO_PI)
FAST_RUN = SensingConfig(integration=FAST, lyapunov=FAST_LYAP)


def oracle_rhs(params, drive, tau, s: StateVector) -> StateVector:
    """Equations of motion written out term by term in complex arithmetic."""
    pr = params
    env = drive.eps + drive.d_eps * np.exp(-1j * (drive.d_omega * tau + drive.theta))
    e1 = env if int(drive.port) == 1 else 0.0
    e2 = env if int(drive.port) == 2 else 0.0
    g, q = pr.g_om, s.q
    da_cw = (-1j * (pr.delta_a - 1j * pr.kappa) * s.a_cw + 1j * g * s.a_cw * q
             + 1j * pr.eta * s.a_ccw + 1j * pr.j_coupling * s.b_ccw + e1)
    da_ccw = (-1j * (pr.delta_a - 1j * pr.kappa) * s.a_ccw + 1j * g * s.a_ccw * q
              + 1j * pr.eta * s.a_cw + 1j * pr.j_coupling * s.b_cw + e2)
    db_cw = (-1j * (pr.delta_b - 1j * pr.gamma) * s.b_cw
             + 1j * pr.xi_mag * np.exp(1j * pr.phi) * s.b_ccw + 1j * pr.j_coupling * s.a_ccw)
    db_ccw = (-1j * (pr.delta_b - 1j * pr.gamma) * s.b_ccw
              + 1j * pr.xi_mag * np.exp(-1j * pr.phi) * s.b_cw + 1j * pr.j_coupling * s.a_cw)
    dq = s.p
    dp = -s.q + g * (abs(s.a_cw) ** 2 + abs(s.a_ccw) ** 2) - pr.gamma_m * s.p
    return StateVector(complex(da_cw), complex(da_ccw), complex(db_cw), complex(db_ccw),
                       float(dq), float(dp))


def random_state(rng, scale=1.0) -> StateVector:
    z = scale * (rng.normal(size=4) + 1j * rng.normal(size=4))
    return StateVector(*[complex(v) for v in z], float(rng.normal()), float(rng.normal()))


# ---------------------------------------------------------------------------
# acceptance reporting: one line per criterion, repeated in the summary

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(criterion, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
