import logging
import math

import mpmath
import numpy as np
import pytest

from mappingtorus import oracle
from mappingtorus.oracle import DualSeries, OracleError, RawSpectrum
from mappingtorus.spectral_model import circle_rotation_torus, klein_bottle, t2_phi

TWO_PI = 2 * math.pi


def _point_spectrum():
    return RawSpectrum(lambda cutoff: (np.array([0.0]), np.array([1.0])), DualSeries.constant(1.0), 0, "point")


@pytest.mark.parametrize("lam", [0.1, 1.0, 7.5])
def test_single_eigenvalue(lam):
    assert oracle.zeta_det_oracle(_point_spectrum(), shift=lam) == pytest.approx(math.log(lam), abs=1e-13)


def test_calibration(oracle_calibrated):
    assert oracle_calibrated < 1e-10


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.3])
def test_circle_zeta_determinant(rho):
    # eigenvalues k²/ρ², log Det* = log(4π²ρ²)
    assert oracle.zeta_det_oracle(oracle.circle_raw(rho), drop_kernel=True) == pytest.approx(
        math.log(4 * math.pi**2 * rho**2), abs=1e-10)


def test_unit_torus_zeta_values():
    raw = oracle.torus_raw(TWO_PI, TWO_PI)
    beta = mpmath.dirichlet(-0.5, [0, 1, 0, -1])
    assert oracle.zeta_value(raw, -0.5) == pytest.approx(float(4 * mpmath.zeta(-0.5) * beta), abs=1e-12)
    assert oracle.zeta_value(raw, 0) == pytest.approx(-1.0, abs=1e-14)
    assert oracle.zeta_value(raw, 2.0) == pytest.approx(float(4 * mpmath.zeta(2) * mpmath.catalan), rel=1e-12)
    with pytest.raises(OracleError):
        oracle.zeta_value(raw, 1.0)


@pytest.mark.parametrize("t", [0.01, 0.1, 0.7])
def test_circle_direct_and_dual_agree(t):
    raw = oracle.circle_raw(1.3)
    assert oracle.heat_trace(raw, t, branch="direct") == pytest.approx(
        oracle.heat_trace(raw, t, branch="dual"), abs=1e-14 * max(1.0, 1 / math.sqrt(t)))


@pytest.mark.parametrize("raw", [oracle.klein_bottle_raw(3.0, 0.7), oracle.torus_raw(2.0, 5.0),
                                 oracle.mapping_torus_raw(t2_phi(), 1),
                                 oracle.mapping_torus_raw(circle_rotation_torus(2.0, 1.3, 0.7), 1)])
@pytest.mark.parametrize("t", [0.3, 0.5, 1.0])
def test_heat_trace_branches_overlap(raw, t):
    direct = oracle.heat_trace(raw, t, branch="direct")
    assert oracle.heat_trace(raw, t, branch="dual") == pytest.approx(direct, abs=1e-12 * max(1.0, direct))


def test_heat_trace_long_time_is_kernel_dimension():
    for raw in (oracle.torus_raw(1.0, 2.0), oracle.klein_bottle_raw(1.0, 1.0), oracle.mapping_torus_raw(t2_phi(), 1)):
        assert oracle.heat_trace(raw, 200.0) == pytest.approx(raw.kernel_dimension(), abs=1e-12)
    with pytest.raises(ValueError):
        oracle.heat_trace(oracle.torus_raw(1.0, 1.0), 0.0)


def test_heat_trace_difference_decays_like_gaussian():
    a = TWO_PI
    kb, torus = oracle.klein_bottle_raw(a, 1.0), oracle.torus_raw(a, TWO_PI)
    ts = np.array([0.05, 0.1, 0.2])
    diffs = np.array([abs(oracle.heat_trace_difference(kb, torus, t)) for t in ts])
    assert diffs.max() < 1e-8
    slope = np.polyfit(1 / ts, np.log(diffs), 1)[0]
    assert slope == pytest.approx(-a**2 / 4, abs=0.3)


def test_heat_trace_difference_matches_direct_sums():
    kb, torus = oracle.klein_bottle_raw(2.0, 1.0), oracle.torus_raw(2.0, TWO_PI)
    t = 0.8
    direct = oracle.heat_trace(kb, t, branch="direct") - oracle.heat_trace(torus, t, branch="direct")
    assert oracle.heat_trace_difference(kb, torus, t) == pytest.approx(direct, abs=1e-12)


def test_eigenvalue_lists_are_nested():
    for raw in (oracle.klein_bottle_raw(3.0, 0.7), oracle.mapping_torus_raw(t2_phi(), 2)):
        ev1, m1 = raw.eigenvalues(20.0)
        ev2, m2 = raw.eigenvalues(60.0)
        keep = ev2 <= 20.0
        assert np.allclose(np.repeat(ev1, m1.astype(int)), np.repeat(ev2[keep], m2[keep].astype(int)), atol=1e-12)


def test_weyl_mismatch_is_logged(caplog):
    bogus = RawSpectrum(lambda c: (np.arange(5.0), np.ones(5)), DualSeries({(1.0, 0.0): 1.0}), 2, "bogus")
    with caplog.at_level(logging.WARNING, logger="mappingtorus.oracle"):
        bogus.eigenvalues(500.0)
    assert "Weyl" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="mappingtorus.oracle"):
        oracle.torus_raw(1.0, 1.0).eigenvalues(500.0)
    assert caplog.text == ""


def test_oracle_errors():
    raw = oracle.klein_bottle_raw(1.0, 1.0)
    with pytest.raises(OracleError):
        oracle.zeta_det_oracle(raw)
    with pytest.raises(OracleError):
        oracle.zeta_det_oracle(raw, drop_kernel=True, cutoff=5.0)
    with pytest.raises(ValueError):
        oracle.zeta_det_oracle(raw, shift=-1.0)


def test_shift_limit_matches_modified_determinant():
    raw = oracle.klein_bottle_raw(TWO_PI, 1.0)
    star = oracle.zeta_det_oracle(raw, drop_kernel=True)
    lam = 1e-6
    assert oracle.zeta_det_oracle(raw, shift=lam) - math.log(lam) == pytest.approx(star, abs=1e-4)


def test_dtn_ode_oracle_examples():
    a, v = 2.0, 1.5
    s = math.sqrt(v)
    R = oracle.dtn_ode_oracle(v, 0.0, a, np.eye(1))
    assert R[0, 0] == pytest.approx(2 * s * math.tanh(s * a / 2), abs=1e-11)
    R = oracle.dtn_ode_oracle(v, 0.0, a, -np.eye(1))
    assert R[0, 0] == pytest.approx(2 * s / math.tanh(s * a / 2), abs=1e-11)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    R = oracle.dtn_ode_oracle(0.5, 1.0, a, swap)
    assert np.allclose(R, R.T, atol=1e-11)
    with pytest.raises(ValueError):
        oracle.dtn_ode_oracle(0.0, 0.0, a, np.eye(1))


def test_dual_series_algebra():
    d = DualSeries({(0.5, 1.0): 2.0}) + DualSeries({(0.5, 1.0): -2.0, (0.0, 0.0): 3.0})
    assert d.items() == [(0.0, 0.0, 3.0)]
    assert (d * DualSeries.constant(2.0)).evaluate(0.4) == pytest.approx(6.0)
    assert DualSeries({(1.0, 200.0): 1.0}).items() == []
    with pytest.raises(OracleError):
        DualSeries({(0.0, 0.0): 1j}).items()


def test_klein_kernel_dimension():
    assert oracle.klein_bottle_raw(1.0, 1.0).kernel_dimension() == 1
    assert oracle.mapping_torus_raw(t2_phi(), 1).kernel_dimension() == 2
    assert oracle.mapping_torus_raw(klein_bottle(1.0, 1.0), 1).kernel_dimension() == 1
