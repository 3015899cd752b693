import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralchaos.model import DriveSpec, Port, SystemParams
from chiralchaos.sensing import (Control, NoTransitionError, PortOutcome, PortRun, Protocol,
                                 RateTable, SensingConfig, SensingWindow, apply_control,
                                 build_window, combine, compare, compose_drive, find_transition,
                                 run_trial, signal_amplitude, signal_power, success_rate_sweep,
                                 theta_grid)

from conftest import FAST_RUN

WINDOW_PARAMS = SystemParams(xi_mag=5.0, phi=0.5 * math.pi, delta_a=0.5598, delta_b=0.5598)


def _stub(c1=0.4, c2=0.6):
    """Port 1 chaotic above c1, port 2 chaotic below c2 (control = phi)."""
    def chaotic(p, d):
        return p.phi > c1 if int(d.port) == 1 else p.phi < c2
    return chaotic


# ---------------------------------------------------------------------------
# composed drive


def test_composed_drive_without_signal():
    c = compose_drive(5.0)
    assert c.eps_tot(3.0) == 5.0 and c.theta_tot(3.0) == 0.0


def test_composed_drive_in_and_out_of_phase():
    assert compose_drive(5.0, 2.0, 0.0, 0.0).eps_tot(0.0) == pytest.approx(7.0)
    assert compose_drive(5.0, 2.0, 0.0, math.pi).eps_tot(0.0) == pytest.approx(3.0)


def test_composed_drive_phase_when_signal_dominates():
    c = compose_drive(1.0, 3.0, 0.0, math.pi)
    assert c.eps_tot(0.0) == pytest.approx(2.0)
    assert abs(c.theta_tot(0.0)) == pytest.approx(math.pi, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 100), st.floats(0, 100), st.floats(-2, 2), st.floats(0, 2 * math.pi),
       st.floats(0, 50))
def test_composed_drive_matches_phasor_sum(eps, d_eps, d_omega, theta, tau):
    c = compose_drive(eps, d_eps, d_omega, theta)
    z = eps + d_eps * np.exp(1j * (d_omega * tau + theta))
    assert c.eps_tot(tau) == pytest.approx(abs(z), rel=1e-12, abs=1e-12)
    if abs(z) > 1e-9:
        assert c.theta_tot(tau) == pytest.approx(np.angle(z), abs=1e-9)
    # the envelope seen by the mode is the conjugate phasor
    assert c.envelope(tau) == pytest.approx(np.conj(z), abs=1e-12 * max(1.0, abs(z)))


def test_compose_drive_validation():
    with pytest.raises(ValueError):
        compose_drive(0.0)
    with pytest.raises(ValueError):
        compose_drive(1.0, -1.0)
    d = compose_drive(2.0, 1.0, 0.5, 0.3).to_drive(2)
    assert d == DriveSpec(port=2, eps=2.0, d_eps=1.0, d_omega=0.5, theta=0.3)


def test_signal_amplitude_round_trip():
    omega = 2 * math.pi * 190e12
    amp = signal_amplitude(1e-9, omega, 1e8)
    assert signal_power(amp, omega, 1e8) == pytest.approx(1e-9, rel=1e-12)
    assert signal_amplitude(0.0, omega, 1e8) == 0.0
    with pytest.raises(ValueError):
        signal_amplitude(-1.0, omega, 1e8)


# ---------------------------------------------------------------------------
# transitions and windows


def test_find_transition_on_stub():
    x = find_transition(SystemParams(), DriveSpec(port=1), "phi", (0.0, 1.0), 1e-4,
                        classifier=_stub(0.3))
    assert x == pytest.approx(0.3, abs=1e-4)


def test_no_transition_raises():
    with pytest.raises(NoTransitionError):
        find_transition(SystemParams(), DriveSpec(port=1), "phi", (0.5, 1.0), 1e-3,
                        classifier=_stub(0.3))


def test_transition_input_checks():
    with pytest.raises(ValueError):
        find_transition(SystemParams(), DriveSpec(), "phi", (1.0, 0.0), 1e-3, classifier=_stub())
    with pytest.raises(ValueError):
        find_transition(SystemParams(), DriveSpec(), "phi", (0.0, 1.0), 0.0, classifier=_stub())


def test_window_arithmetic():
    w = build_window(SystemParams(), "phi", (0.0, 1.0), 1e-6, classifier=_stub(0.4, 0.6))
    assert w.crit_port1 == pytest.approx(0.4, abs=1e-6)
    assert w.crit_port2 == pytest.approx(0.6, abs=1e-6)
    assert w.half_width_d == pytest.approx(0.1, abs=1e-6)
    assert w.center_p == pytest.approx(0.5, abs=1e-6)
    assert w.working_point_f == w.center_p


def test_window_mirror_swaps_critical_points():
    # mirroring the device maps phi -> -phi and port 1 <-> port 2
    mirror = lambda p, d: _stub(0.4, 0.6)(p.with_(phi=-p.phi), d.mirrored())
    w = build_window(SystemParams(), "phi", (-1.0, 0.0), 1e-6, classifier=mirror)
    assert w.crit_port1 == pytest.approx(-0.6, abs=1e-6)
    assert w.crit_port2 == pytest.approx(-0.4, abs=1e-6)


def test_degenerate_and_outside_windows():
    w = SensingWindow.from_critical("eps", 3.0, 3.0)
    assert w.degenerate and w.half_width_d == 0.0
    with pytest.raises(ValueError):
        SensingWindow.from_critical("eps", 1.0, 2.0, working_point=2.5)
    w = SensingWindow.from_critical("eps", 1.0, 2.0).with_working_point(1.2)
    assert w.working_point_f == 1.2 and w.to_dict()["P"] == 1.5


def test_apply_control_and_parsers():
    p, d = apply_control(SystemParams(), DriveSpec(), Control.DELTA, 0.7)
    assert p.delta_a == p.delta_b == 0.7
    p, d = apply_control(SystemParams(), DriveSpec(), "eps", 9.0)
    assert d.eps == 9.0
    assert Protocol.parse("DualPort") is Protocol.DUAL_PORT
    assert Protocol.parse("single_port") is Protocol.SINGLE_PORT
    with pytest.raises(ValueError):
        Control.parse("kappa")


# ---------------------------------------------------------------------------
# trials


def _run(chaotic, i_a):
    return PortRun(Port.PORT1, chaotic, "Chaos" if chaotic else "PeriodDoubling", 0.0, i_a)


def test_compare_requires_both_criteria():
    base = _run(True, 100.0)
    assert compare(base, _run(False, 90.0), 0.02).success
    assert not compare(base, _run(False, 99.0), 0.02).success
    assert not compare(base, _run(True, 50.0), 0.02).success
    assert compare(base, _run(True, 100.0), 0.02).delta_i_a == 0.0


def test_combine_dual_is_or_of_ports():
    ok = PortOutcome(Port.PORT1, True, True, -5.0)
    no = PortOutcome(Port.PORT2, False, True, -1.0)
    out = combine([ok, no], Protocol.DUAL_PORT)
    assert out.success and out.delta_i_a == -5.0
    assert out.port(2) is no
    assert not combine([no], Protocol.SINGLE_PORT).success


@pytest.fixture(scope="module")
def window():
    return SensingWindow.from_critical("eps", 54886.658, 54887.539, working_point=54887.0)


def test_zero_signal_never_succeeds(window):
    out = run_trial(WINDOW_PARAMS, window, 0.0, 0.0, 0.0, config=FAST_RUN)
    assert not out.success
    assert all(o.delta_i_a == 0.0 for o in out.ports)


def test_trials_are_deterministic_and_theta_periodic(window):
    a = run_trial(WINDOW_PARAMS, window, 50.0, 0.0, 0.4, "single", config=FAST_RUN)
    b = run_trial(WINDOW_PARAMS, window, 50.0, 0.0, 0.4, "single", config=FAST_RUN)
    c = run_trial(WINDOW_PARAMS, window, 50.0, 0.0, 0.4 + 2 * math.pi, "single", config=FAST_RUN)
    assert a == b
    assert c.delta_i_a == pytest.approx(a.delta_i_a, rel=1e-6)


def test_rate_sweep_with_stub(window, tmp_path):
    never = lambda th, de, dw: (PortOutcome(Port.PORT1, False, False, 0.0),
                                PortOutcome(Port.PORT2, False, False, 0.0))
    t = success_rate_sweep(SystemParams(), window, second_values=[0.0, 1.0], trial_fn=never)
    assert list(t.dual_rate) == [0.0, 0.0] and t.success_map().shape == (2, 16)

    def half(th, de, dw):
        return (PortOutcome(Port.PORT1, th < math.pi, True, -1.0),
                PortOutcome(Port.PORT2, th >= 1.5 * math.pi, True, -1.0))
    t = success_rate_sweep(SystemParams(), window, thetas=theta_grid(8), trial_fn=half)
    assert t.dual_rate[0] == 0.75 and t.single_rate[0] == 0.25
    t.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("theta,second_axis,port1_success") and len(lines) == 9
    assert isinstance(t, RateTable) and t.summary()["n_theta"] == 8


def test_rate_sweep_validation(window):
    with pytest.raises(ValueError):
        success_rate_sweep(SystemParams(), window, second_axis="phi")
    with pytest.raises(ValueError):
        theta_grid(0)


def test_config_accepts_dicts():
    cfg = SensingConfig(integration={"method": "rk4"}, amp_change_tol=0.1)
    assert cfg.integration.method.value == "rk4"
    with pytest.raises(ValueError):
        SensingConfig(amp_change_tol=-1.0)
