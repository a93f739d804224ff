"""Log-determinants of Laplacians on mapping tori and their product models.

The general formula for the modified determinant on q-forms is

    log Det* Δ^q_{M_φ} = -(b_q + b_{q-1} - ℓ_q - ℓ_{q-1}) log(a²/2)
                         + log Det* Δ^q_{M×S¹(a/2π)}
                         + log det(I - ½(φ* + (φ⁻¹)*))|_S
                         + log det_Fr(I + X K)|_{H^⊥},

where S is the orthogonal complement of the fixed harmonic forms and the
last factor runs over the non-harmonic eigenblocks of Ω^q ⊕ Ω^{q-1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import oracle
from .fredholm import (
    DetResult,
    TruncationError,
    TruncationPolicy,
    counting_polynomial,
    exponential_tail,
    finite_block_logdet,
    fredholm_correction,
    resolve_cutoff,
)
from .spectral_model import (
    IDENTITY,
    Circle,
    ManifoldSpec,
    MappingTorusSpec,
    RectTorus,
    form_spectrum,
    harmonic_actions,
    IsometrySpec,
    product,
    t2_phi,
    tilde_spectrum,
)

CLOSED_FORM_TOL = 1e-14
LATTICE_TOL = 1e-12
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class HeatCoefficients:
    """Coefficients 𝔞_j of t^{-(m-1)/2 + j} in the small-t heat trace on M."""

    coeffs: tuple
    base_dim: int

    def get(self, j: int) -> float:
        if j < 0 or j >= len(self.coeffs):
            raise ValueError(f"heat coefficient 𝔞_{j} is not available")
        return self.coeffs[j]


def heat_coefficients(base: ManifoldSpec, q: int = 0, n_coeffs: int = 3) -> HeatCoefficients:
    """Heat coefficients of Δ on Ω^q ⊕ Ω^{q-1} of a flat base.

    On a flat manifold only 𝔞₀ = (components)·vol/(4π)^{d/2} is nonzero; the
    rest of the trace is exponentially small.
    """
    d = base.dimension
    comps = sum(math.comb(d, p) for p in (q, q - 1) if 0 <= p <= d)
    if isinstance(base, Circle):
        vol = TWO_PI * base.radius
    elif isinstance(base, RectTorus):
        vol = base.L1 * base.L2
    else:
        raise TypeError(f"unsupported base {type(base).__name__}")
    a0 = comps * vol / (4 * math.pi) ** (d / 2)
    return HeatCoefficients((a0,) + (0.0,) * (n_coeffs - 1), d)


def c0_coefficient(heat: HeatCoefficients, lam: float, m: int) -> float:
    """The constant c₀(λ) of the gluing formula (zero for even m)."""
    if m < 2:
        raise ValueError("m must be at least 2")
    if m % 2 == 0:
        return 0.0
    h = (m - 1) // 2
    terms = [(-1) ** k / math.factorial(k) * heat.get(h - k) * lam**k for k in range(h + 1)]
    return -math.log(2) * math.fsum(terms)


def zeta_zero_shifted(heat: HeatCoefficients, lam: float, mu: float, m: int) -> float:
    """log 2 · ζ(0) of Δ̃ + λ + μ from the heat coefficients (zero for even m)."""
    if m < 2:
        raise ValueError("m must be at least 2")
    if m % 2 == 0:
        return 0.0
    h = (m - 1) // 2
    terms = []
    for ell in range(h + 1):
        for k in range(h - ell + 1):
            coef = (-1) ** (k + ell) / (math.factorial(k) * math.factorial(ell))
            terms.append(coef * heat.get(h - k - ell) * lam**k * mu**ell)
    return math.log(2) * math.fsum(terms)


# --------------------------------------------------------------------------
# one-dimensional series


def _geometric_series(term, c: float, const: float, tol: float, start: int = 1):
    """Σ_{k≥start} term(k) where |term(k)| ≤ const·e^{-ck}; returns (value, tail, n)."""
    ratio = -math.expm1(-c)
    k_end = start
    while const * math.exp(-c * k_end) / ratio > tol:
        k_end += max(1, k_end // 2)
    k = np.arange(start, k_end)
    vals = term(k)
    tail = const * math.exp(-c * k_end) / ratio
    return math.fsum(vals), tail, len(k)


def circle_det_massive(a: float, t: float) -> float:
    """log Det(-d²/du² + t²) on the circle of length a."""
    if not a > 0:
        raise ValueError("a must be positive")
    if not t > 0:
        raise ValueError("t must be positive; the t = 0 operator has a kernel")
    return a * t + 2 * math.log1p(-math.exp(-a * t))


def rect_torus_det_result(a: float, rho: float, tol: float = CLOSED_FORM_TOL) -> DetResult:
    if not (a > 0 and rho > 0):
        raise ValueError("a and rho must be positive")
    c = 4 * math.pi**2 * rho / a
    # |log(1 - e^{-ck})| ≤ e^{-ck}/(1 - e^{-c})
    s, tail, n = _geometric_series(lambda k: np.log1p(-np.exp(-c * k)), c,
                                   1.0 / -math.expm1(-c), tol / 4)
    value = 2 * math.log(TWO_PI * rho) - 2 * math.pi**2 * rho / (3 * a) + 4 * s
    return DetResult(value, 4 * tail, n, {})


def rect_torus_det(a: float, rho: float) -> float:
    """log Det* of the scalar Laplacian on the flat torus with periods (a, 2πρ)."""
    return rect_torus_det_result(a, rho).value


def klein_correction(a: float, rho: float, tol: float = CLOSED_FORM_TOL):
    """2 Σ_{k≥1} log(1 + 2/(e^{ak/ρ} - 1)); returns (value, tail, n)."""
    c = a / rho
    s, tail, n = _geometric_series(lambda k: np.log1p(2 / np.expm1(c * k)), c,
                                   2.0 / -math.expm1(-c), tol / 2)
    return 2 * s, 2 * tail, n


def klein_bottle_det_result(a: float, rho: float) -> DetResult:
    torus = rect_torus_det_result(a, rho)
    corr, tail, n = klein_correction(a, rho)
    return DetResult(torus.value + corr, torus.tail_bound + tail, torus.blocks_used + n,
                     {"torus": torus.value, "correction": corr})


def klein_bottle_det(a: float, rho: float) -> float:
    """log Det* of the scalar Laplacian on the Klein bottle."""
    return klein_bottle_det_result(a, rho).value


# --------------------------------------------------------------------------
# products with a circle


@lru_cache(maxsize=None)
def zeta_minus_half(base: ManifoldSpec) -> float:
    """ζ_M(-½) of the scalar Laplacian, by theta-integral continuation."""
    if isinstance(base, Circle):
        raw = oracle.circle_raw(base.radius)
    elif isinstance(base, RectTorus):
        raw = oracle.torus_raw(base.L1, base.L2)
    else:
        raise TypeError(f"unsupported base {type(base).__name__}")
    return oracle.zeta_value(raw, -0.5)


def _lattice_cutoff(base: ManifoldSpec, decay: float, const: float, tol: float) -> tuple:
    """Smallest doubled Λ with const·Σ_{ν>√Λ} e^{-decay·ν} ≤ tol; returns (Λ, bound)."""
    counting = counting_polynomial(base)
    cutoff = 4.0
    for _ in range(40):
        bound = const * exponential_tail(decay, math.sqrt(cutoff), counting)
        if bound <= tol:
            return cutoff, bound
        cutoff *= 2
    raise TruncationError("lattice sum tail cannot be bounded")


def _scalar_shells(base: ManifoldSpec, cutoff: float):
    """(ν, multiplicity) for nonzero scalar eigenvalues with ν² ≤ cutoff."""
    blocks = form_spectrum(IsometrySpec(IDENTITY, base), 0, cutoff).blocks
    nu = np.array([math.sqrt(b.nu2) for b in blocks if b.nu2 > 0])
    mult = np.array([b.multiplicity for b in blocks if b.nu2 > 0], dtype=float)
    return nu, mult


def product_with_circle_det_result(base: ManifoldSpec, a: float,
                                   policy: TruncationPolicy | None = None) -> DetResult:
    policy = policy or TruncationPolicy(tail_tol=LATTICE_TOL)
    if not a > 0:
        raise ValueError("a must be positive")
    if not isinstance(base, (Circle, RectTorus)):
        raise TypeError(f"unsupported base {type(base).__name__}")
    nu_min = 1.0 / base.radius if isinstance(base, Circle) else TWO_PI / max(base.L1, base.L2)
    # |log(1 - e^{-aν})| ≤ e^{-aν}/(1 - e^{-aν_min})
    const = 2.0 / -math.expm1(-a * nu_min)
    cutoff, bound = _lattice_cutoff(base, a, const, policy.tail_tol)
    if policy.cutoff is not None:
        if policy.cutoff < cutoff:
            bound = const * exponential_tail(a, math.sqrt(policy.cutoff), counting_polynomial(base))
            if bound > policy.tail_tol:
                raise TruncationError(f"tail bound {bound:.3g} exceeds {policy.tail_tol:.3g}")
        cutoff = policy.cutoff
    nu, mult = _scalar_shells(base, cutoff)
    series = 2 * math.fsum(mult * np.log1p(-np.exp(-a * nu)))
    zeta = zeta_minus_half(base)
    value = 2 * math.log(a) + a * zeta + series
    return DetResult(value, bound, len(nu), {"zeta_minus_half": zeta, "cutoff": cutoff})


def product_with_circle_det(base: ManifoldSpec, a: float,
                            policy: TruncationPolicy | None = None) -> float:
    """log Det* of the scalar Laplacian on M × S¹(a/2π).

    Equals 2 log a + a ζ_M(-½) + 2 Σ_{ν>0} log(1 - e^{-aν}) over the nonzero
    spectrum {ν²} of M.
    """
    return product_with_circle_det_result(base, a, policy).value


# --------------------------------------------------------------------------
# mapping tori


def _degrees(spec: MappingTorusSpec, q: int):
    d = spec.base.dimension
    if q < 0 or q > d + 1:
        raise ValueError(f"form degree {q} outside 0..{d + 1}")
    return [p for p in (q, q - 1) if 0 <= p <= d]


def mapping_torus_det_shifted(spec: MappingTorusSpec, q: int, lam: float,
                              policy: TruncationPolicy | None = None) -> DetResult:
    """log Det(Δ^q_{M_φ} + λ) = log Det(Δ^q_{M×S¹} + λ) + Fredholm correction."""
    policy = policy or TruncationPolicy()
    if not lam > 0:
        raise ValueError("lam must be positive")
    degrees = _degrees(spec, q)
    comps = sum(math.comb(spec.base.dimension, p) for p in degrees)
    prod = oracle.zeta_det_oracle(oracle.mapping_torus_raw(product(spec.base, spec.a), q), shift=lam)
    cutoff = resolve_cutoff(policy, spec.a, lam, spec.base, comps)
    corr = fredholm_correction(tilde_spectrum(spec, q, cutoff), spec.a, lam, policy)
    return DetResult(prod + corr.value, corr.tail_bound, corr.blocks_used,
                     {"product": prod, "fredholm": corr.value, "cutoff": cutoff})


def mapping_torus_det_modified(spec: MappingTorusSpec, q: int,
                               policy: TruncationPolicy | None = None) -> DetResult:
    """log Det* Δ^q_{M_φ} by the four-term gluing formula."""
    policy = policy or TruncationPolicy()
    degrees = _degrees(spec, q)
    h = harmonic_actions(spec)
    d = spec.base.dimension
    comps = sum(math.comb(d, p) for p in degrees)
    excess = sum(h.betti[p] - h.ell[p] for p in degrees)
    log_term = -excess * math.log(spec.a**2 / 2)
    prod = product_with_circle_det_result(spec.base, spec.a, TruncationPolicy(tail_tol=policy.tail_tol))
    harmonic = math.fsum(finite_block_logdet(h.s_blocks[p]) for p in degrees)
    if spec.isometry.kind == IDENTITY:
        fred = DetResult(0.0)
    else:
        cutoff = resolve_cutoff(policy, spec.a, 0.0, spec.base, comps)
        fred = fredholm_correction(tilde_spectrum(spec, q, cutoff), spec.a, 0.0, policy,
                                   exclude_kernel=True)
    value = log_term + comps * prod.value + harmonic + fred.value
    return DetResult(value, comps * prod.tail_bound + fred.tail_bound,
                     prod.blocks_used + fred.blocks_used,
                     {"log_a2_term": log_term, "product": comps * prod.value,
                      "harmonic": harmonic, "fredholm": fred.value})


# --------------------------------------------------------------------------
# the swap-shift mapping torus of the unit torus


def t2_phi_action_multiplicities(shell_value: int) -> dict:
    """κ-multiplicities of I - ½(φ* + (φ⁻¹)*) on the shell m² + n² = shell_value.

    Diagonal points (k, k) give κ = 0 for even k and κ = 2 for odd k; a pair
    {(m, n), (n, m)} with m ≠ n gives one κ = 0 and one κ = 2 if m ≡ n mod 2,
    and two κ = 1 otherwise.
    """
    s = int(shell_value)
    if s < 0:
        return {}
    out = {0: 0, 1: 0, 2: 0}
    r = math.isqrt(s)
    found = False
    for m in range(-r, r + 1):
        rest = s - m * m
        n = math.isqrt(rest)
        if n * n != rest:
            continue
        for nn in {n, -n}:
            found = True
            if m == nn:
                out[0 if m % 2 == 0 else 2] += 2  # counted in halves below
            elif (m - nn) % 2 == 0:
                out[0] += 1
                out[2] += 1
            else:
                out[1] += 2
    if not found:
        return {}
    return {k: v // 2 for k, v in out.items() if v}


def _t2_lattice(R: float):
    r = int(math.ceil(R)) + 1
    m, n = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    keep = (m * m + n * n <= R * R) & ((m != 0) | (n != 0))
    return m[keep], n[keep]


def t2_phi_det_result(policy: TruncationPolicy | None = None, variant: str = "reference") -> DetResult:
    """Closed form for log Det* of the scalar Laplacian on T²_φ.

    ``variant="reference"`` evaluates the four-term reference formula.
    ``"corrected"`` also subtracts Σ log(1 + 2/(e^{2π|v|} - 1)) over lattice points v = (m, n)
    with m ≠ n, m ≡ n mod 2: each such pair {(m,n),(n,m)} carries one κ = 0
    mode, which the reference formula still counts as κ = 2.
    """
    if variant not in ("reference", "corrected"):
        raise ValueError(f"unknown variant {variant!r}")
    policy = policy or TruncationPolicy(tail_tol=LATTICE_TOL)
    base = RectTorus(TWO_PI, TWO_PI)
    a = TWO_PI
    counting = counting_polynomial(base)
    # per-point bounds: log(1+e^{-x}) ≤ e^{-x}; the odd-shell term ≤ 2e^{-x}/(1-2e^{-2π});
    # the κ = 0 corrections ≤ 2e^{-x}/(1-e^{-2π})
    const = 2 + 2 * 2 / (1 - 2 * math.exp(-a)) + 2 / -math.expm1(-a)
    R = 2.0
    while const * exponential_tail(a, R, counting) > policy.tail_tol / 2:
        R *= 1.25
    bound = const * exponential_tail(a, R, counting)
    m, n = _t2_lattice(R)
    x = a * np.hypot(m, n)
    zeta = zeta_minus_half(base)
    first = 2 * math.fsum(np.log1p(np.exp(-x)))
    odd = (m % 2 == 0) & (n % 2 == 1)
    e = np.exp(-x[odd])
    second = 2 * math.fsum(np.log1p(-2 * e / (1 + e) ** 2))
    diag_c = 4 * math.sqrt(2) * math.pi
    diag, diag_tail, _ = _geometric_series(lambda k: np.log1p(2 / np.expm1(diag_c * k)), diag_c,
                                           2 / -math.expm1(-diag_c), policy.tail_tol / 8)
    third = -4 * diag
    terms = {"log_term": 2 * math.log(a), "zeta_term": a * zeta, "lattice": first,
             "odd_shells": second, "diagonal": third}
    if variant == "corrected":
        off = (m != n) & ((m - n) % 2 == 0)
        terms["kappa0_pairs"] = -math.fsum(np.log1p(2 / np.expm1(x[off])))
    value = math.fsum(terms.values())
    return DetResult(value, bound + 4 * diag_tail, len(m), terms)


def t2_phi_det(policy: TruncationPolicy | None = None, variant: str = "reference") -> float:
    """log Det* Δ on T²_φ from its closed form; see ``t2_phi_det_result``."""
    return t2_phi_det_result(policy, variant).value


def t2_phi_spec() -> MappingTorusSpec:
    return t2_phi()
