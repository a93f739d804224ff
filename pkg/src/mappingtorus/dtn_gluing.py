"""Blockwise Dirichlet-to-Neumann operator for the cut mapping torus.

On an eigenspace of Δ_M with eigenvalue ν², boundary data ω are extended to
[0, a] by solving -ψ'' + vψ = 0 (v = ν² + shift), with ψ(0) = ω and ψ(a)
the transported datum.  The jump of normal derivatives gives

    R = 2√v tanh(a√v/2) [I + X K],   X = 1 / (2 sinh²(a√v/2)),

where K = I - ½(A + Aᵀ) and A is the pull-back on the eigenspace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-8


def _check_orthogonal(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("action must be a square matrix")
    err = np.abs(A.T @ A - np.eye(A.shape[0])).max() if A.size else 0.0
    if err > ORTHO_TOL:
        raise ValueError(f"action is not orthogonal (|AᵀA - I| = {err:.3g})")
    return A


def kappa_matrix(action: np.ndarray) -> np.ndarray:
    """I - ½(A + Aᵀ), symmetric by construction."""
    A = np.asarray(action, dtype=float)
    return np.eye(A.shape[0]) - 0.5 * (A + A.T)


def coupling_factor(x: float) -> float:
    """2eˣ/(eˣ - 1)² = 1/(2 sinh²(x/2)), without overflow for large x."""
    if x <= 0:
        raise ValueError("x must be positive")
    e = math.exp(-x)
    return 2.0 * e / math.expm1(-x) ** 2


@dataclass(frozen=True)
class DtnBlock:
    nu2: float
    shift: float
    a: float
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class BoundarySolution:
    """ψ(u) = coeff_left·s(a-u) + coeff_right·s(u), s(u) = sinh(√v u)/sinh(√v a)."""

    nu2: float
    shift: float
    a: float
    coeff_left: np.ndarray
    coeff_right: np.ndarray

    @property
    def rate(self) -> float:
        return math.sqrt(self.nu2 + self.shift)

    def _profile(self, u):
        # sinh(cu)/sinh(ca) = e^{-c(a-u)} (1 - e^{-2cu}) / (1 - e^{-2ca})
        c, a = self.rate, self.a
        u = np.asarray(u, dtype=float)
        return np.exp(-c * (a - u)) * -np.expm1(-2 * c * u) / -math.expm1(-2 * c * a)

    def _profile_derivative(self, u):
        # c cosh(cu)/sinh(ca)
        c, a = self.rate, self.a
        u = np.asarray(u, dtype=float)
        return c * np.exp(-c * (a - u)) * (1 + np.exp(-2 * c * u)) / -math.expm1(-2 * c * a)

    def evaluate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        left = self._profile(self.a - u)
        right = self._profile(u)
        return np.multiply.outer(left, self.coeff_left) + np.multiply.outer(right, self.coeff_right)

    def derivative(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        left = -self._profile_derivative(self.a - u)
        right = self._profile_derivative(u)
        return np.multiply.outer(left, self.coeff_left) + np.multiply.outer(right, self.coeff_right)


def boundary_solution(nu2: float, shift: float, a: float, datum, transported_datum) -> BoundarySolution:
    """Solve -ψ'' + (ν² + shift)ψ = 0 with ψ(0) = datum, ψ(a) = transported_datum."""
    if not a > 0:
        raise ValueError("a must be positive")
    if not nu2 + shift > 0:
        raise ValueError("nu2 + shift must be positive; use dtn_zero_mode")
    left = np.atleast_1d(np.asarray(datum, dtype=float)).copy()
    right = np.atleast_1d(np.asarray(transported_datum, dtype=float)).copy()
    if left.shape != right.shape:
        raise ValueError("datum and transported_datum must have equal length")
    left.setflags(write=False)
    right.setflags(write=False)
    return BoundarySolution(float(nu2), float(shift), float(a), left, right)


def dtn_block(nu2: float, shift: float, a: float, action, inverse_action=None) -> DtnBlock:
    """The Dirichlet-to-Neumann matrix on one eigenspace.

    Parameters
    ----------
    nu2 : float
        Eigenvalue of Δ_M on the block.
    shift : float
        Spectral shift λ + μ.
    a : float
        Interval length.
    action, inverse_action : ndarray
        Pull-backs φ* and (φ⁻¹)* on the block.  ``inverse_action`` defaults
        to the transpose of ``action``; only the symmetric part is used.

    Returns
    -------
    DtnBlock
    """
    if not a > 0:
        raise ValueError("a must be positive")
    v = nu2 + shift
    if not v > 0:
        raise ValueError("nu2 + shift must be positive; use dtn_zero_mode")
    A = _check_orthogonal(action)
    B = A.T if inverse_action is None else _check_orthogonal(inverse_action)
    n = A.shape[0]
    K = np.eye(n) - 0.25 * (A + A.T + B + B.T)
    K = 0.5 * (K + K.T)
    root = math.sqrt(v)
    x = a * root
    R = 2 * root * math.tanh(0.5 * x) * (np.eye(n) + coupling_factor(x) * K)
    return DtnBlock(float(nu2), float(shift), float(a), 0.5 * (R + R.T))


def dtn_zero_mode(a: float, action, inverse_action=None) -> DtnBlock:
    """The ν = 0, zero-shift block (2/a)(I - ½(A + A⁻¹))."""
    if not a > 0:
        raise ValueError("a must be positive")
    A = _check_orthogonal(action)
    B = A.T if inverse_action is None else _check_orthogonal(inverse_action)
    K = np.eye(A.shape[0]) - 0.25 * (A + A.T + B + B.T)
    K = 0.5 * (K + K.T)
    return DtnBlock(0.0, 0.0, float(a), (2.0 / a) * K)
