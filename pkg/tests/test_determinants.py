import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mappingtorus import oracle
from mappingtorus.determinants import (
    c0_coefficient,
    circle_det_massive,
    heat_coefficients,
    klein_bottle_det,
    klein_bottle_det_result,
    mapping_torus_det_modified,
    mapping_torus_det_shifted,
    product_with_circle_det,
    product_with_circle_det_result,
    rect_torus_det,
    t2_phi_action_multiplicities,
    t2_phi_det,
    t2_phi_det_result,
    zeta_minus_half,
    zeta_zero_shifted,
)
from mappingtorus.fredholm import TruncationError, TruncationPolicy, fredholm_correction, resolve_cutoff
from mappingtorus.spectral_model import (
    Circle,
    RectTorus,
    circle_rotation_torus,
    form_spectrum,
    klein_bottle,
    product,
    t2_phi,
    tilde_spectrum,
)

TWO_PI = 2 * math.pi
UNIT = RectTorus(TWO_PI, TWO_PI)


def test_circle_det_massive_examples(oracle_calibrated):
    assert circle_det_massive(1.0, 1.0) == pytest.approx(1 + 2 * math.log(1 - math.exp(-1)), abs=1e-15)
    ref = oracle.zeta_det_oracle(oracle.massive_circle_raw(TWO_PI), shift=0.25)
    assert circle_det_massive(TWO_PI, 0.5) == pytest.approx(ref, abs=1e-10)
    for at in (5.5, 10.0, 40.0, 800.0):
        assert abs(circle_det_massive(at, 1.0) - at) <= 3 * math.exp(-at)
    with pytest.raises(ValueError):
        circle_det_massive(1.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 40.0), st.floats(0.02, 8.0))
def test_rect_torus_period_swap(a, rho):
    assert rect_torus_det(a, rho) == pytest.approx(rect_torus_det(TWO_PI * rho, a / TWO_PI), abs=1e-10)


@pytest.mark.parametrize("a,rho", [(TWO_PI, 1.0), (3.0, 0.7), (1.0, 3.0)])
def test_rect_torus_matches_oracle(oracle_calibrated, a, rho):
    ref = oracle.zeta_det_oracle(oracle.torus_raw(a, TWO_PI * rho), drop_kernel=True)
    assert rect_torus_det(a, rho) == pytest.approx(ref, abs=1e-8)


def test_rect_torus_long_interval_series():
    rho = 1.0
    for a in (20.0, 80.0, 320.0):
        head = 2 * math.log(TWO_PI * rho) - 2 * math.pi**2 * rho / (3 * a)
        series = 4 * math.fsum(math.log1p(-math.exp(-4 * math.pi**2 * rho * k / a)) for k in range(1, 200000))
        assert rect_torus_det(a, rho) - head == pytest.approx(series, abs=1e-9)
        assert series < 0


@pytest.mark.parametrize("a,rho", [(TWO_PI, 1.0), (3.0, 0.7)])
def test_klein_bottle_closed_form(oracle_calibrated, a, rho):
    corr = 2 * math.fsum(math.log1p(2 / math.expm1(a * k / rho)) for k in range(1, 100))
    assert klein_bottle_det(a, rho) - rect_torus_det(a, rho) == pytest.approx(corr, abs=1e-14)
    ref = oracle.zeta_det_oracle(oracle.klein_bottle_raw(a, rho), drop_kernel=True)
    assert klein_bottle_det(a, rho) == pytest.approx(ref, abs=1e-8)
    assert klein_bottle_det_result(a, rho).tail_bound < 1e-14


def test_product_with_circle_reduces_to_torus():
    for a, rho in ((TWO_PI, 1.0), (2.0, 0.4), (0.7, 1.5)):
        assert product_with_circle_det(Circle(rho), a) == pytest.approx(rect_torus_det(a, rho), abs=1e-10)


def test_product_with_unit_torus(oracle_calibrated):
    zeta = zeta_minus_half(UNIT)
    R = 30
    m, n = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1))
    r = np.hypot(m, n)[(m != 0) | (n != 0)]
    direct = 2 * math.log(TWO_PI) + TWO_PI * zeta + 2 * math.fsum(np.log1p(-np.exp(-TWO_PI * r)))
    res = product_with_circle_det_result(UNIT, TWO_PI)
    assert res.value == pytest.approx(direct, abs=1e-12)
    ref = oracle.zeta_det_oracle(oracle.mapping_torus_raw(product(UNIT, TWO_PI)), drop_kernel=True)
    assert res.value == pytest.approx(ref, abs=1e-10)
    # the (m, n) = (1, 0) shell has four lattice points
    shells = form_spectrum(product(UNIT, 1.0).isometry, 0, 1.0).blocks
    assert shells[1].multiplicity == 4


def test_zeta_minus_half_values():
    assert zeta_minus_half(Circle(2.0)) == pytest.approx(-1 / 12, abs=1e-13)
    import mpmath

    ref = float(4 * mpmath.zeta(-0.5) * mpmath.dirichlet(-0.5, [0, 1, 0, -1]))
    assert zeta_minus_half(UNIT) == pytest.approx(ref, abs=1e-13)


def test_product_policy_cutoff_checked():
    with pytest.raises(TruncationError):
        product_with_circle_det_result(UNIT, TWO_PI, TruncationPolicy(cutoff=1.0))
    with pytest.raises(TypeError):
        product_with_circle_det(object(), 1.0)


def test_heat_coefficients():
    h = heat_coefficients(Circle(1.5))
    assert h.coeffs[0] == pytest.approx(1.5 * math.sqrt(math.pi))
    assert h.coeffs[1:] == (0.0, 0.0)
    h = heat_coefficients(RectTorus(2.0, 3.0))
    assert h.coeffs[0] == pytest.approx(6.0 / (4 * math.pi))
    assert heat_coefficients(RectTorus(2.0, 3.0), q=1).coeffs[0] == pytest.approx(3 * 6.0 / (4 * math.pi))


def test_heat_coefficient_matches_weyl_term():
    raw = oracle.torus_raw(2.0, 3.0)
    p, c = raw.dual.leading_coefficient()
    assert p == 1.0 and c == pytest.approx(heat_coefficients(RectTorus(2.0, 3.0)).coeffs[0], rel=1e-14)


def test_c0_coefficient():
    h1 = heat_coefficients(Circle(1.0))
    assert c0_coefficient(h1, 0.0, 2) == 0.0
    assert c0_coefficient(h1, 3.0, 2) == 0.0
    h2 = heat_coefficients(UNIT)
    # m = 3, λ = 0: -log 2 · 𝔞₁, and 𝔞₁ = 0 on a flat torus
    assert c0_coefficient(h2, 0.0, 3) == 0.0
    zeta0 = oracle.zeta_value(oracle.torus_raw(TWO_PI, TWO_PI), 0)
    assert zeta0 == pytest.approx(-1.0, abs=1e-14)
    assert c0_coefficient(h2, 0.0, 3) == pytest.approx(-math.log(2) * (zeta0 + 1), abs=1e-14)
    # degree one in λ with slope log 2 · 𝔞₀
    lam, d = 0.7, 1e-4
    fd = (c0_coefficient(h2, lam + d, 3) - c0_coefficient(h2, lam - d, 3)) / (2 * d)
    assert fd == pytest.approx(math.log(2) * h2.coeffs[0], rel=1e-9)
    with pytest.raises(ValueError):
        c0_coefficient(h2, 0.0, 1)


def test_zeta_zero_shifted():
    h = heat_coefficients(UNIT)
    assert zeta_zero_shifted(h, 1.0, 2.0, 2) == 0.0
    for lam in (0.0, 0.3, 2.0):
        assert zeta_zero_shifted(h, lam, 0.0, 3) == pytest.approx(-c0_coefficient(h, lam, 3), abs=1e-15)
    assert zeta_zero_shifted(h, 0.0, 0.0, 3) == pytest.approx(math.log(2) * h.coeffs[1], abs=1e-15)
    # log 2 · ζ(0) of Δ + λ + μ equals log 2 · (𝔞₁ - (λ+μ)𝔞₀) in three dimensions
    assert zeta_zero_shifted(h, 0.4, 0.6, 3) == pytest.approx(-math.log(2) * h.coeffs[0], rel=1e-14)


def test_c0_matches_shifted_zeta_at_zero():
    # ζ(0) of Δ_{T²} + λ from the oracle equals (𝔞₁ - λ 𝔞₀), so c₀(λ) = -log 2 · ζ(0)
    h = heat_coefficients(UNIT)
    raw = oracle.torus_raw(TWO_PI, TWO_PI)
    assert oracle.zeta_value(raw, 0) + 1 == pytest.approx(h.coeffs[1], abs=1e-14)


def test_shifted_identity_has_no_correction(oracle_calibrated):
    spec = product(Circle(1.0), 2.0)
    r = mapping_torus_det_shifted(spec, 0, 0.8)
    assert r.diagnostics["fredholm"] == 0.0
    ref = oracle.zeta_det_oracle(oracle.torus_raw(2.0, TWO_PI), shift=0.8)
    assert r.value == pytest.approx(ref, abs=1e-12)


def test_shifted_klein_bottle_matches_eigenvalue_list(oracle_calibrated):
    spec = klein_bottle(TWO_PI, 1.0)
    ref = oracle.zeta_det_oracle(oracle.klein_bottle_raw(TWO_PI, 1.0), shift=1.0)
    assert mapping_torus_det_shifted(spec, 0, 1.0).value == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_shifted_gluing_decomposition(oracle_calibrated, lam):
    spec = klein_bottle(TWO_PI, 1.0)
    kb = oracle.zeta_det_oracle(oracle.klein_bottle_raw(TWO_PI, 1.0), shift=lam)
    prod = oracle.zeta_det_oracle(oracle.torus_raw(TWO_PI, TWO_PI), shift=lam)
    policy = TruncationPolicy()
    cutoff = resolve_cutoff(policy, spec.a, lam, spec.base)
    corr = fredholm_correction(tilde_spectrum(spec, 0, cutoff), spec.a, lam, policy).value
    assert kb - prod == pytest.approx(corr, abs=1e-10)


@pytest.mark.parametrize("spec", [klein_bottle(3.0, 0.7), t2_phi(), circle_rotation_torus(2.0, 1.3, 0.7)])
def test_shifted_all_degrees_match_oracle(oracle_calibrated, spec):
    for q in range(spec.dimension + 1):
        ref = oracle.zeta_det_oracle(oracle.mapping_torus_raw(spec, q), shift=0.6)
        assert mapping_torus_det_shifted(spec, q, 0.6).value == pytest.approx(ref, abs=1e-10)


def test_shifted_small_lambda_limit():
    spec = klein_bottle(TWO_PI, 1.0)
    target = mapping_torus_det_modified(spec, 0).value
    prev = None
    for lam in (1e-3, 1e-4, 1e-5):
        gap = abs(mapping_torus_det_shifted(spec, 0, lam).value - math.log(lam) - target)
        assert gap < 50 * lam
        if prev is not None:
            assert gap < prev
        prev = gap


def test_shifted_concave_in_lambda():
    # d²/dλ² log Det(Δ + λ) = -Σ (μ + λ)^{-2} < 0 in two dimensions
    spec = klein_bottle(TWO_PI, 1.0)
    lams = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
    vals = np.array([mapping_torus_det_shifted(spec, 0, l).value for l in lams])
    assert np.all(np.diff(vals, 2) < 0)


@pytest.mark.parametrize("a,rho", [(TWO_PI, 1.0), (3.0, 0.7), (0.8, 1.9)])
def test_modified_klein_matches_closed_form(a, rho):
    assert mapping_torus_det_modified(klein_bottle(a, rho), 0).value == pytest.approx(
        klein_bottle_det(a, rho), abs=1e-10)


@pytest.mark.parametrize("base", [Circle(0.9), RectTorus(TWO_PI, 4.0)])
def test_modified_identity_is_product(base):
    spec = product(base, 1.7)
    for q in range(spec.dimension + 1):
        r = mapping_torus_det_modified(spec, q)
        comps = math.comb(spec.dimension, q)
        assert r.value == pytest.approx(comps * product_with_circle_det(base, 1.7), abs=1e-12)
        assert r.diagnostics["fredholm"] == 0.0 and r.diagnostics["log_a2_term"] == 0.0


@pytest.mark.parametrize("spec", [klein_bottle(2.0, 1.3), t2_phi(), circle_rotation_torus(2.0, 1.3, 0.7),
                                  product(UNIT, 3.0)])
def test_modified_all_degrees_match_oracle(oracle_calibrated, spec):
    for q in range(spec.dimension + 1):
        ref = oracle.zeta_det_oracle(oracle.mapping_torus_raw(spec, q), drop_kernel=True)
        assert mapping_torus_det_modified(spec, q).value == pytest.approx(ref, abs=1e-10)


def test_t2_phi_closed_form_terms():
    r = t2_phi_det_result()
    assert r.tail_bound < 1e-12
    prod = product_with_circle_det(UNIT, TWO_PI)
    diff = r.value - prod
    # the same difference written as Fredholm-type sums over the lattice
    R = 12
    m, n = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1))
    keep = (m != 0) | (n != 0)
    x = TWO_PI * np.hypot(m, n)[keep]
    s1 = 2 * math.fsum(np.log1p(2 / np.expm1(x)))
    mo, no = 2 * m.ravel(), 2 * n.ravel() + 1
    y = TWO_PI * np.hypot(mo, no)
    s2 = 2 * math.fsum(np.log1p(-2 * np.exp(y) / (np.exp(y) + 1) ** 2))
    s3 = -4 * math.fsum(math.log1p(2 / math.expm1(4 * math.sqrt(2) * math.pi * k)) for k in range(1, 10))
    assert diff == pytest.approx(s1 + s2 + s3, abs=1e-12)


def test_t2_phi_corrected_variant_matches_generic_pathway():
    generic = mapping_torus_det_modified(t2_phi(), 0).value
    assert t2_phi_det(variant="corrected") == pytest.approx(generic, abs=1e-10)
    with pytest.raises(ValueError):
        t2_phi_det(variant="other")


def test_t2_phi_reference_variant_discrepancy_is_the_kappa0_pairs():
    reference = t2_phi_det_result(variant="reference")
    corrected = t2_phi_det_result(variant="corrected")
    gap = corrected.value - reference.value
    assert gap == pytest.approx(corrected.diagnostics["kappa0_pairs"], abs=1e-15)
    # κ = 0 points with m ≠ n, m ≡ n (2): two on the shell 2, four on the shell 4
    shells = -2 * math.log1p(2 / math.expm1(TWO_PI * math.sqrt(2))) - 4 * math.log1p(2 / math.expm1(2 * TWO_PI))
    assert gap == pytest.approx(shells, rel=1e-3)


def test_t2_phi_multiplicities_examples():
    assert t2_phi_action_multiplicities(0) == {0: 1}
    assert t2_phi_action_multiplicities(2) == {0: 1, 2: 3}
    assert t2_phi_action_multiplicities(1) == {1: 4}
    assert t2_phi_action_multiplicities(3) == {}
    assert t2_phi_action_multiplicities(-1) == {}


def test_t2_phi_multiplicities_match_action_matrices():
    blocks = form_spectrum(t2_phi().isometry, 0, 130.0).blocks
    for b in blocks:
        kappa = np.round(np.linalg.eigvalsh(b.kappa_matrix())).astype(int)
        counts = {k: int(np.sum(kappa == k)) for k in (0, 1, 2) if np.sum(kappa == k)}
        assert counts == t2_phi_action_multiplicities(round(b.nu2))
