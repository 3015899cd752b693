import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralchaos.model import (SWAP_INDEX, DivergenceError, DriveSpec, Port, StateVector,
                               SystemParams, jacobian, jvp, rhs, rhs_flat, swap_flat,
                               wrap_phase)

from conftest import oracle_rhs, random_state


def _rand_params(rng):
    return SystemParams(delta_a=rng.uniform(-2, 2), delta_b=rng.uniform(-2, 2),
                        kappa=rng.uniform(0.05, 1), gamma=rng.uniform(0.5, 8),
                        g_om=rng.uniform(0, 1e-3), gamma_m=rng.uniform(1e-3, 0.1),
                        eta=rng.uniform(0, 1), xi_mag=rng.uniform(0, 6),
                        phi=rng.uniform(-math.pi, math.pi), j_coupling=rng.uniform(0, 3))


def _rand_drive(rng, port=None):
    return DriveSpec(port=port or int(rng.integers(1, 3)), eps=rng.uniform(0, 1e3),
                     d_eps=rng.uniform(0, 50), d_omega=rng.uniform(-1, 1),
                     theta=rng.uniform(0, 2 * math.pi))


def test_rhs_matches_complex_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p, d, s = _rand_params(rng), _rand_drive(rng), random_state(rng, 10.0)
        tau = rng.uniform(0, 100)
        got = rhs(p, d, tau, s).to_flat()
        want = oracle_rhs(p, d, tau, s).to_flat()
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12 * np.abs(want).max())


def test_rest_state_with_no_drive_is_fixed():
    out = rhs_flat(SystemParams(), DriveSpec(eps=0.0), 0.0, np.zeros(10))
    assert np.all(out == 0.0)


def test_pump_enters_selected_port_only():
    for port, idx in ((1, 0), (2, 2)):
        out = rhs_flat(SystemParams(), DriveSpec(port=port, eps=7.0), 0.0, np.zeros(10))
        expect = np.zeros(10)
        expect[idx] = 7.0
        assert np.array_equal(out, expect)


def test_jacobian_against_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p, d, s = _rand_params(rng), _rand_drive(rng), random_state(rng, 30.0)
        x = s.to_flat()
        v = rng.normal(size=10)
        h = 1e-6
        fd = (rhs_flat(p, d, 0.3, x + h * v) - rhs_flat(p, d, 0.3, x - h * v)) / (2 * h)
        an = jacobian(p, d, 0.3, x) @ v
        assert np.linalg.norm(fd - an) <= 1e-7 * max(1.0, np.linalg.norm(an))


def test_jvp_kernel_equals_dense_jacobian():
    rng = np.random.default_rng(3)
    p, s = _rand_params(rng), random_state(rng, 5.0)
    v = rng.normal(size=10)
    assert np.allclose(jvp(p, s, v), jacobian(p, DriveSpec(), 0.0, s) @ v, rtol=1e-14,
                       atol=1e-13)


def test_swap_symmetry_at_rhs_level():
    rng = np.random.default_rng(4)
    for _ in range(30):
        p, d, s = _rand_params(rng), _rand_drive(rng), random_state(rng, 10.0)
        lhs = rhs(p.mirrored(), d.mirrored(), 1.7, s.swapped()).to_flat()
        rhs_ = swap_flat(rhs(p, d, 1.7, s).to_flat())
        assert np.allclose(lhs, rhs_, rtol=1e-12, atol=1e-12 * np.abs(rhs_).max())


def test_swap_index_is_an_involution():
    assert np.array_equal(SWAP_INDEX[SWAP_INDEX], np.arange(10))


def test_nonfinite_state_raises_divergence():
    x = np.zeros(10)
    x[3] = np.nan
    with pytest.raises(DivergenceError):
        rhs_flat(SystemParams(), DriveSpec(), 2.0, x)
    with pytest.raises(DivergenceError):
        jacobian(SystemParams(), DriveSpec(), 2.0, x)


@pytest.mark.parametrize("bad", [dict(kappa=-1.0), dict(gamma=float("nan")),
                                 dict(xi_mag=-0.1), dict(delta_a=float("inf"))])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        SystemParams(**bad)


@pytest.mark.parametrize("bad", [dict(eps=-1.0), dict(d_eps=-2.0), dict(theta=float("nan")),
                                 dict(port=3)])
def test_drive_validation(bad):
    with pytest.raises(ValueError):
        DriveSpec(**bad)


def test_port_parse_and_other():
    assert Port.parse("port2") is Port.PORT2
    assert Port.parse(1) is Port.PORT1
    assert Port.PORT1.other() is Port.PORT2
    with pytest.raises(ValueError):
        Port.parse("left")


def test_drive_envelope():
    d = DriveSpec(eps=3.0, d_eps=1.0, d_omega=0.5, theta=0.25)
    tau = 2.0
    assert d.envelope(tau) == pytest.approx(3.0 + np.exp(-1j * (0.5 * tau + 0.25)), abs=1e-14)
    assert DriveSpec(d_eps=1.0).is_autonomous
    assert not DriveSpec(d_eps=1.0, d_omega=0.1).is_autonomous


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_phase_range(phi):
    w = wrap_phase(phi)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(phi), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=10, max_size=10))
def test_state_flat_roundtrip(vals):
    x = np.array(vals)
    assert np.array_equal(StateVector.from_flat(x).to_flat(), x)
    assert np.array_equal(StateVector.from_flat(x).swapped().to_flat(), swap_flat(x))


def test_state_intensities():
    s = StateVector(3 + 4j, 1j, 2.0 + 0j, 0j, 0.0, 0.0)
    assert s.i_a == pytest.approx(26.0)
    assert s.i_b == pytest.approx(4.0)
    with pytest.raises(ValueError):
        StateVector.from_flat(np.zeros(9))


def test_params_roundtrip_and_mirror():
    p = SystemParams(phi=0.4, xi_mag=2.0)
    assert SystemParams(**p.to_dict()) == p
    assert p.mirrored().phi == -0.4
    assert SystemParams(phi=3 * math.pi).phi == pytest.approx(math.pi)
