"""Analytic torsion, Witten-deformed torsion and Lefschetz zeta functions."""
from __future__ import annotations

import math

import numpy as np

from .determinants import circle_det_massive, mapping_torus_det_modified, mapping_torus_det_shifted
from .dtn_gluing import coupling_factor
from .fredholm import TruncationPolicy, finite_block_logdet
from .spectral_model import HarmonicActionSet, MappingTorusSpec, harmonic_actions

INTEGER_TOL = 1e-9
SERIES_TOL = 1e-14
PATHWAY_TOL = 1e-12


class LefschetzError(ArithmeticError):
    pass


class LefschetzData:
    """Lefschetz numbers L(φ^k) of one action set, memoized per instance."""

    def __init__(self, actions: HarmonicActionSet):
        self.actions = actions
        self._numbers: dict = {}
        self._eigs = [np.linalg.eigvals(A) if A.size else np.zeros(0) for A in actions.actions]

    def _trace_sum(self, k: int) -> float:
        return math.fsum((-1) ** q * np.trace(np.linalg.matrix_power(A, k))
                         for q, A in enumerate(self.actions.actions) if A.size)

    def _eigen_sum(self, k: int) -> float:
        return math.fsum((-1) ** q * float(np.sum(ev**k).real) for q, ev in enumerate(self._eigs))

    def number(self, k: int) -> int:
        if k < 1:
            raise ValueError("k must be at least 1")
        if k not in self._numbers:
            raw = self._trace_sum(k)
            check = self._eigen_sum(k)
            value = round(raw)
            if abs(raw - value) > INTEGER_TOL or abs(check - value) > INTEGER_TOL:
                raise LefschetzError(f"L(φ^{k}) = {raw!r} is not an integer")
            self._numbers[k] = int(value)
        return self._numbers[k]

    @property
    def numbers(self) -> dict:
        return dict(self._numbers)


def lefschetz_number(actions: HarmonicActionSet, k: int = 1) -> int:
    """L(φ^k) = Σ_q (-1)^q Tr(A_q^k)."""
    return LefschetzData(actions).number(k)


def transpose_actions(actions: HarmonicActionSet) -> HarmonicActionSet:
    """The action set of φ⁻¹ (transposed orthogonal matrices)."""
    return HarmonicActionSet(tuple(A.T for A in actions.actions), actions.betti, actions.ell,
                             actions.s_blocks)


def lefschetz_zeta_rational(actions: HarmonicActionSet, t: float) -> float:
    """Σ_q (-1)^{q+1} log det(I - tA_q)."""
    terms = []
    for q, A in enumerate(actions.actions):
        if not A.size:
            continue
        sign, logdet = np.linalg.slogdet(np.eye(A.shape[0]) - t * A)
        if sign <= 0:
            raise LefschetzError("det(I - tA) is not positive")
        terms.append((-1) ** (q + 1) * logdet)
    return math.fsum(terms)


def lefschetz_zeta_log(actions: HarmonicActionSet, t: float, data: LefschetzData | None = None) -> float:
    """log ζ_φ(t) = Σ_k L(φ^k) t^k/k, cross-checked against the rational form.

    The series is truncated once B|t|^{K+1}/((K+1)(1-|t|)) < 1e-14 with
    B = Σ b_q ≥ |L_k|.
    """
    if not abs(t) < 1:
        raise ValueError("|t| must be below 1")
    data = data or LefschetzData(actions)
    bound = max(1, sum(actions.betti))
    terms = []
    k = 1
    while True:
        terms.append(data.number(k) * t**k / k)
        tail = bound * abs(t) ** (k + 1) / ((k + 1) * (1 - abs(t)))
        if tail < SERIES_TOL:
            break
        k += 1
    series = math.fsum(terms)
    rational = lefschetz_zeta_rational(actions, t)
    if abs(series - rational) > PATHWAY_TOL:
        raise LefschetzError(f"series {series!r} and rational form {rational!r} disagree")
    return series


def analytic_torsion(spec: MappingTorusSpec) -> float:
    """log T(M_φ) from harmonic data:

    ½ log 2·χ(M) + ½ log(a²/2)·Σ (-1)^q ℓ_q + ½ Σ (-1)^q log det(S_q).
    """
    h = harmonic_actions(spec)
    ell_sum = sum((-1) ** q * l for q, l in enumerate(h.ell))
    s_sum = math.fsum((-1) ** q * finite_block_logdet(S) for q, S in enumerate(h.s_blocks))
    return 0.5 * (math.log(2) * h.euler_characteristic + math.log(spec.a**2 / 2) * ell_sum + s_sum)


def torsion_from_definition(spec: MappingTorusSpec, policy: TruncationPolicy | None = None) -> float:
    """½ Σ_q (-1)^{q+1} q log Det* Δ^q over all degrees of the mapping torus."""
    terms = [(-1) ** (q + 1) * q * mapping_torus_det_modified(spec, q, policy).value
             for q in range(1, spec.dimension + 1)]
    return 0.5 * math.fsum(terms)


def witten_torsion(spec: MappingTorusSpec, t: float) -> float:
    """log T(M_φ, t) = (a/2) χ(M) t - log ζ_φ(e^{-at})."""
    if not t > 0:
        raise ValueError("t must be positive")
    h = harmonic_actions(spec)
    return 0.5 * spec.a * h.euler_characteristic * t - lefschetz_zeta_log(h, math.exp(-spec.a * t))


def witten_torsion_assembled(spec: MappingTorusSpec, t: float,
                             policy: TruncationPolicy | None = None) -> float:
    """Deformed torsion from the product part and the harmonic Fredholm blocks.

    ½χ(M) log Det(Δ_{S¹} + t²) + ½ Σ_q (-1)^q log det(I + X(at) K_q)|_{H^q},
    the non-harmonic blocks having cancelled in the alternating sum.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    h = harmonic_actions(spec)
    X = coupling_factor(spec.a * t)
    terms = []
    for q, A in enumerate(h.actions):
        if not A.size:
            continue
        kappa = np.linalg.eigvalsh(np.eye(A.shape[0]) - 0.5 * (A + A.T))
        terms.append((-1) ** q * math.fsum(np.log1p(X * np.clip(kappa, 0.0, 2.0))))
    product_part = 0.5 * h.euler_characteristic * circle_det_massive(spec.a, t)
    return product_part + 0.5 * math.fsum(terms)


def witten_torsion_from_definition(spec: MappingTorusSpec, t: float,
                                   policy: TruncationPolicy | None = None) -> float:
    """½ Σ_q (-1)^{q+1} q log Det(Δ^q + t²) from shifted determinants."""
    if not t > 0:
        raise ValueError("t must be positive")
    terms = [(-1) ** (q + 1) * q * mapping_torus_det_shifted(spec, q, t * t, policy).value
             for q in range(1, spec.dimension + 1)]
    return 0.5 * math.fsum(terms)
