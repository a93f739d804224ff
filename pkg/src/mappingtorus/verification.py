"""Cross-validation checks run by ``mappingtorus verify``.

Each check compares two independent computations and reports the largest
residual against its tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ortho_group

from . import oracle
from .determinants import (
    circle_det_massive,
    klein_bottle_det,
    mapping_torus_det_modified,
    mapping_torus_det_shifted,
    rect_torus_det,
    t2_phi_det,
)
from .dtn_gluing import dtn_block
from .fredholm import TruncationPolicy, fredholm_correction, resolve_cutoff
from .spectral_model import (
    Circle,
    circle_rotation_torus,
    harmonic_actions,
    klein_bottle,
    product,
    t2_phi,
    tilde_spectrum,
)
from .torsion import (
    analytic_torsion,
    lefschetz_number,
    lefschetz_zeta_log,
    lefschetz_zeta_rational,
    torsion_from_definition,
    transpose_actions,
    witten_torsion,
    witten_torsion_assembled,
)

TWO_PI = 2 * math.pi
DEFAULT_SEED = 20240601


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    details: dict = field(default_factory=dict)


def _result(name, residuals, tol, **details) -> CheckResult:
    worst = max(residuals) if residuals else 0.0
    return CheckResult(name, bool(worst <= tol), float(worst), tol, details)


def check_massive_circle(policy, seed) -> CheckResult:
    res = []
    for a in (1.0, TWO_PI):
        for t in (0.25, 1.0, 4.0):
            value = oracle.zeta_det_oracle(oracle.massive_circle_raw(a), shift=t * t)
            res.append(abs(value - circle_det_massive(a, t)))
    return _result("massive-circle", res, 1e-10)


def check_klein_bottle(policy, seed) -> CheckResult:
    res = []
    for a, rho in ((TWO_PI, 1.0), (3.0, 0.7)):
        value = oracle.zeta_det_oracle(oracle.klein_bottle_raw(a, rho), drop_kernel=True)
        res.append(abs(value - klein_bottle_det(a, rho)))
    return _result("klein-bottle", res, 1e-8)


def check_t2_phi(policy, seed) -> CheckResult:
    ref = oracle.zeta_det_oracle(oracle.mapping_torus_raw(t2_phi()), drop_kernel=True)
    reference = t2_phi_det(variant="reference")
    corrected = t2_phi_det(variant="corrected")
    return _result("t2-phi", [abs(reference - ref)], 1e-6,
                   oracle=ref, reference=reference, corrected=corrected,
                   corrected_residual=abs(corrected - ref))


def check_gluing_shifted(policy, seed) -> CheckResult:
    res = []
    spec = klein_bottle(TWO_PI, 1.0)
    prod_raw = oracle.mapping_torus_raw(product(spec.base, spec.a))
    kb_raw = oracle.klein_bottle_raw(spec.a, spec.base.radius)
    for lam in (0.5, 1.0, 2.0):
        diff = oracle.zeta_det_oracle(kb_raw, shift=lam) - oracle.zeta_det_oracle(prod_raw, shift=lam)
        cutoff = resolve_cutoff(policy, spec.a, lam, spec.base)
        corr = fredholm_correction(tilde_spectrum(spec, 0, cutoff), spec.a, lam, policy)
        res.append(abs(diff - corr.value))
    return _result("gluing-shifted", res, 1e-10)


def check_gluing_modified(policy, seed) -> CheckResult:
    res_k = []
    for a, rho in ((TWO_PI, 1.0), (3.0, 0.7)):
        gen = mapping_torus_det_modified(klein_bottle(a, rho), 0, policy).value
        res_k.append(abs(gen - klein_bottle_det(a, rho)))
    gen_t = mapping_torus_det_modified(t2_phi(), 0, policy).value
    res_t = abs(gen_t - t2_phi_det(variant="reference"))
    passed = max(res_k) <= 1e-10 and res_t <= 1e-8
    return CheckResult("gluing-modified", passed, max(max(res_k), res_t), 1e-8,
                       {"klein_residual": max(res_k), "t2_phi_residual": res_t,
                        "t2_phi_corrected_residual": abs(gen_t - t2_phi_det(variant="corrected"))})


def check_heat_trace(policy, seed) -> CheckResult:
    kb = oracle.klein_bottle_raw(TWO_PI, 1.0)
    torus = oracle.torus_raw(TWO_PI, TWO_PI)
    ts = np.array([0.05, 0.1, 0.2])
    diffs = np.array([abs(oracle.heat_trace_difference(kb, torus, t)) for t in ts])
    slope = float(np.polyfit(1 / ts, np.log(diffs), 1)[0]) if np.all(diffs > 0) else 0.0
    passed = bool(diffs.max() <= 1e-8 and slope < 0)
    return CheckResult("heat-trace", passed, float(diffs.max()), 1e-8, {"log_slope": slope})


def check_torsion(policy, seed) -> CheckResult:
    res = []
    for a, rho in ((TWO_PI, 1.0), (3.0, 0.7)):
        spec = klein_bottle(a, rho)
        th, df = analytic_torsion(spec), torsion_from_definition(spec, policy)
        res += [abs(th - df), abs(th - math.log(a / 2)), abs(df - math.log(a / 2))]
    rot = circle_rotation_torus(2.0, 1.3, 0.7)
    rot_res = max(abs(analytic_torsion(rot)), abs(torsion_from_definition(rot, policy)))
    passed = max(res) <= 1e-8 and rot_res <= 1e-10
    return CheckResult("torsion", passed, max(max(res), rot_res), 1e-8, {"rotation": rot_res})


def check_witten(policy, seed) -> CheckResult:
    res = []
    rot = circle_rotation_torus(2.0, 1.3, 0.7)
    for spec in (klein_bottle(TWO_PI, 1.0), rot):
        for t in (0.5, 1.0, 2.0):
            res.append(abs(witten_torsion(spec, t) - witten_torsion_assembled(spec, t, policy)))
    for t in (0.5, 1.0, 2.0):
        res.append(abs(witten_torsion(rot, t)))
    return _result("witten", res, 1e-8)


def _all_specs():
    return [klein_bottle(TWO_PI, 1.0), t2_phi(), circle_rotation_torus(2.0, 1.3, 0.7),
            product(Circle(1.0), 2.0)]


def check_lefschetz(policy, seed) -> CheckResult:
    res = []
    exact = True
    for spec in _all_specs():
        h = harmonic_actions(spec)
        hinv = transpose_actions(h)
        for t in (-0.9, -0.5, -0.1, 0.1, 0.5, 0.9):
            res.append(abs(lefschetz_zeta_log(h, t) - lefschetz_zeta_rational(h, t)))
        exact &= all(lefschetz_number(h, k) == lefschetz_number(hinv, k) for k in range(1, 13))
    return CheckResult("lefschetz", bool(max(res) <= 1e-12 and exact), max(res), 1e-12,
                       {"inverse_invariant": exact})


def random_dtn_instance(rng):
    n = int(rng.integers(1, 5))
    if n == 1:
        A = np.array([[rng.choice([-1.0, 1.0])]])
    else:
        A = ortho_group.rvs(n, random_state=rng)
    return float(rng.uniform(0, 10)), float(rng.uniform(0.01, 5)), float(rng.uniform(0.5, 5)), A


def check_dtn(policy, seed) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = []
    for _ in range(100):
        nu2, shift, a, A = random_dtn_instance(rng)
        R = dtn_block(nu2, shift, a, A).matrix
        res.append(float(np.abs(R - oracle.dtn_ode_oracle(nu2, shift, a, A)).max()))
    return _result("dtn", res, 1e-8, seed=seed)


def check_properties(policy, seed) -> CheckResult:
    res = []
    for a, rho in ((TWO_PI, 1.0), (3.0, 0.7), (0.9, 2.5)):
        res.append(abs(rect_torus_det(a, rho) - rect_torus_det(TWO_PI * rho, a / TWO_PI)))
    flags = {"period_swap": max(res) <= 1e-10}
    spec = klein_bottle(TWO_PI, 1.0)
    positive = dominated = True
    for lam_cut in (2.0, 8.0):
        loose = TruncationPolicy(cutoff=lam_cut, tail_tol=1.0)
        lo = fredholm_correction(tilde_spectrum(spec, 0, lam_cut), spec.a, 0.0, loose, True)
        hi = fredholm_correction(tilde_spectrum(spec, 0, 2 * lam_cut), spec.a, 0.0, loose, True)
        positive &= lo.value >= 0
        dominated &= abs(hi.value - lo.value) <= lo.tail_bound
    flags["fredholm_nonnegative"] = bool(positive)
    flags["tail_dominates"] = bool(dominated)
    ident = product(Circle(1.0), TWO_PI)
    cutoff = resolve_cutoff(policy, ident.a, 1.0, ident.base)
    flags["identity_zero"] = fredholm_correction(tilde_spectrum(ident, 0, cutoff), ident.a, 1.0,
                                                 policy).value == 0.0
    vals = [mapping_torus_det_shifted(spec, 0, lam, policy).value for lam in (0.5, 1.0, 2.0)]
    flags["increasing_in_lambda"] = bool(vals[0] < vals[1] < vals[2])
    return CheckResult("properties", all(flags.values()), max(res), 1e-10,
                       dict(flags, shifted_values=vals))


CHECKS = {
    "massive-circle": check_massive_circle,
    "klein-bottle": check_klein_bottle,
    "t2-phi": check_t2_phi,
    "gluing-shifted": check_gluing_shifted,
    "gluing-modified": check_gluing_modified,
    "heat-trace": check_heat_trace,
    "torsion": check_torsion,
    "witten": check_witten,
    "lefschetz": check_lefschetz,
    "dtn": check_dtn,
    "properties": check_properties,
}


def run_checks(names=None, policy: TruncationPolicy | None = None, seed: int = DEFAULT_SEED):
    policy = policy or TruncationPolicy()
    names = list(CHECKS) if not names else names
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown check(s): {', '.join(unknown)}")
    # the oracle calibration runs first; nothing else is trusted if it fails
    ordered = sorted(names, key=lambda n: n != "massive-circle")
    return [CHECKS[n](policy, seed) for n in ordered]
