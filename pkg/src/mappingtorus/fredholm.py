"""Fredholm corrections as error-bounded sums over eigenblocks.

Each block with eigenvalue ν² contributes log det(I + X K), where
K = I - ½(A + Aᵀ) and X = 2eˣ/(eˣ - 1)², x = a√(ν² + λ).  Blocks are summed
in ascending ν² with a compensated (``math.fsum``) reduction, so the result
does not depend on how the per-block work is scheduled.

Tail bounds
-----------
For x ≥ x_R one has log(1 + 2X) ≤ 2X ≤ C₀ e^{-x} with C₀ = 4/(1 - e^{-x_R})².
If the number of scalar eigenvalues with ν ≤ r is at most
U(r) = u₀ + u₁r + u₂r², Stieltjes integration by parts gives

    Σ_{ν > R} e^{-a√(ν²+λ)} ≤ e^{-a w} [u₀ + u₁(w + 1/a) + u₂(w² + 2w/a + 2/a²)],

with w = √(R² + λ).  The counting constants are

    circle of radius ρ:   U(r) = 1 + 2ρr
    torus with periods L: U(r) = π(r + h)²/(ω₁ω₂),  ω_i = 2π/L_i,  h = ½|ω|
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dtn_gluing import coupling_factor
from .spectral_model import Circle, ManifoldSpec, RectTorus, SpectrumStream

THREADS_ENV = "MAPPINGTORUS_THREADS"
DEFAULT_TAIL_TOL = 1e-12
START_CUTOFF = 4.0
MAX_DOUBLINGS = 40


class TruncationError(RuntimeError):
    """The requested tail tolerance cannot be met."""


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    """Cutoff and tolerance for every infinite series.

    ``cutoff=None`` lets the caller pick the smallest doubled cutoff whose
    certified tail bound is below ``tail_tol``.
    """

    cutoff: float | None = None
    tail_tol: float = DEFAULT_TAIL_TOL
    max_blocks: int = 200_000

    def __post_init__(self):
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be positive, got {self.tail_tol!r}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff!r}")
        if self.max_blocks < 1:
            raise ValueError("max_blocks must be at least 1")


@dataclass(frozen=True)
class DetResult:
    value: float
    tail_bound: float = 0.0
    blocks_used: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("determinant value is not finite")
        if not self.tail_bound >= 0:
            raise ValueError("tail_bound must be non-negative")


# --------------------------------------------------------------------------
# tail bounds


def counting_polynomial(base: ManifoldSpec) -> tuple:
    """(u₀, u₁, u₂) with #{ν ≤ r} ≤ u₀ + u₁r + u₂r² for scalar eigenvalues."""
    if isinstance(base, Circle):
        return (1.0, 2.0 * base.radius, 0.0)
    if isinstance(base, RectTorus):
        w1, w2 = 2 * math.pi / base.L1, 2 * math.pi / base.L2
        h = 0.5 * math.hypot(w1, w2)
        c = math.pi / (w1 * w2)
        return (c * h * h, 2 * c * h, c)
    raise TypeError(f"unsupported base {type(base).__name__}")


def exponential_tail(decay: float, w: float, counting: tuple) -> float:
    """Bound on Σ_{ν > R} e^{-decay·√(ν²+λ)} given w = √(R²+λ)."""
    u0, u1, u2 = counting
    e = math.exp(-decay * w)
    poly = u0 + u1 * (w + 1 / decay) + u2 * (w * w + 2 * w / decay + 2 / decay**2)
    return e * poly


def tail_bound(cutoff: float, a: float, shift: float, base: ManifoldSpec,
               components: int = 1) -> float:
    """Certified bound on the Fredholm blocks with ν² > ``cutoff``.

    Decreasing in ``cutoff`` and in ``a``; ``components`` is the number of
    parallel-frame components per scalar eigenfunction.
    """
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    if not a > 0:
        raise ValueError("a must be positive")
    w = math.sqrt(cutoff + shift)
    x = a * w
    c0 = 4.0 / (-math.expm1(-x)) ** 2
    return components * c0 * exponential_tail(a, w, counting_polynomial(base))


def resolve_cutoff(policy: TruncationPolicy, a: float, shift: float, base: ManifoldSpec,
                   components: int = 1) -> float:
    """Policy cutoff, or the first doubled cutoff meeting ``tail_tol``."""
    if policy.cutoff is not None:
        bound = tail_bound(policy.cutoff, a, shift, base, components)
        if bound > policy.tail_tol:
            raise TruncationError(
                f"tail bound {bound:.3g} at cutoff {policy.cutoff:g} exceeds {policy.tail_tol:.3g}")
        return policy.cutoff
    cutoff = START_CUTOFF
    for _ in range(MAX_DOUBLINGS):
        if tail_bound(cutoff, a, shift, base, components) <= policy.tail_tol:
            return cutoff
        cutoff *= 2
    raise TruncationError(f"no cutoff up to {cutoff:g} meets tail_tol {policy.tail_tol:.3g}")


# --------------------------------------------------------------------------
# block sums


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def block_logdet(nu2: float, multiplicity: int, kappa: np.ndarray, a: float, shift: float) -> float:
    """log det(I + X K) for one block, from the eigenvalues of K."""
    x = a * math.sqrt(nu2 + shift)
    X = coupling_factor(x)
    k = np.clip(kappa, 0.0, 2.0)
    return math.fsum(np.log1p(X * k))


def fredholm_correction(spectrum: SpectrumStream, a: float, shift: float,
                        policy: TruncationPolicy, exclude_kernel: bool = False) -> DetResult:
    """Σ over blocks of log det[I + X(a√(ν²+λ))(I - ½(A + Aᵀ))].

    Parameters
    ----------
    spectrum : SpectrumStream
        Blocks to sum; its cutoff is checked against ``policy.tail_tol``.
    a : float
        Interval length of the mapping torus.
    shift : float
        Spectral parameter λ ≥ 0.
    policy : TruncationPolicy
    exclude_kernel : bool
        Drop the ν² = 0 blocks.  Required when ``shift`` is zero.

    Returns
    -------
    DetResult
    """
    if shift < 0:
        raise ValueError("shift must be non-negative")
    if not a > 0:
        raise ValueError("a must be positive")
    blocks = [b for b in spectrum.blocks if not (exclude_kernel and b.nu2 == 0.0)]
    if shift == 0.0 and any(b.nu2 == 0.0 for b in blocks):
        raise ValueError("shift 0 needs exclude_kernel=True: the ν=0 factor is singular")
    if len(blocks) > policy.max_blocks:
        raise TruncationError(f"{len(blocks)} blocks exceed max_blocks={policy.max_blocks}")
    bound = tail_bound(spectrum.cutoff, a, shift, spectrum.base, spectrum.components)
    if bound > policy.tail_tol:
        raise TruncationError(
            f"tail bound {bound:.3g} at cutoff {spectrum.cutoff:g} exceeds {policy.tail_tol:.3g}")

    def work(blk):
        kappa = np.linalg.eigvalsh(blk.kappa_matrix())
        return block_logdet(blk.nu2, blk.multiplicity, kappa, a, shift)

    n_threads = _threads()
    if n_threads > 1 and len(blocks) > 64:
        with ThreadPoolExecutor(n_threads) as pool:
            terms = list(pool.map(work, blocks))
    else:
        terms = [work(b) for b in blocks]
    # blocks arrive sorted by ν², so this is the fixed ascending reduction
    value = math.fsum(terms)
    return DetResult(value, bound, len(blocks), {"cutoff": float(spectrum.cutoff),
                                                "largest_term": max(terms, default=0.0)})


def finite_block_logdet(block) -> float:
    """log det of a symmetric positive definite matrix via Cholesky."""
    S = np.asarray(block, dtype=float)
    if S.size == 0:
        return 0.0
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("block must be square")
    if np.abs(S - S.T).max() > 1e-12 * max(1.0, np.abs(S).max()):
        raise NotPositiveDefiniteError("block is not symmetric")
    if S.shape == (1, 1):
        if not S[0, 0] > 0:
            raise NotPositiveDefiniteError("block is not positive definite")
        return math.log(S[0, 0])
    if S.shape == (2, 2):
        det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        if not (S[0, 0] > 0 and det > 0):
            raise NotPositiveDefiniteError("block is not positive definite")
        return math.log(det)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("block is not positive definite") from exc
    return 2.0 * math.fsum(np.log(np.diag(L)))
