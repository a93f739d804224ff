"""Flat base manifolds, their isometries and Laplace spectra on forms.

Every eigenspace is described in a real basis (cosines and sines of lattice
frequencies, tensored with a parallel coframe for forms of positive degree),
so the pull-back of an isometry is a real orthogonal matrix on each block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

ORTHO_TOL = 1e-12
CLUSTER_TOL = 1e-10


@dataclass(frozen=True)
class Circle:
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"circle radius must be positive, got {self.radius!r}")

    @property
    def dimension(self) -> int:
        return 1


@dataclass(frozen=True)
class RectTorus:
    L1: float
    L2: float

    def __post_init__(self):
        for name in ("L1", "L2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"torus period {name} must be positive, got {v!r}")

    @property
    def dimension(self) -> int:
        return 2


ManifoldSpec = Union[Circle, RectTorus]

IDENTITY = "identity"
CIRCLE_REFLECTION = "circle_reflection"
CIRCLE_ROTATION = "circle_rotation"
TORUS_SWAP_SHIFT = "torus_swap_shift"

_KINDS = {
    IDENTITY: (Circle, RectTorus),
    CIRCLE_REFLECTION: (Circle,),
    CIRCLE_ROTATION: (Circle,),
    TORUS_SWAP_SHIFT: (RectTorus,),
}


@dataclass(frozen=True)
class IsometrySpec:
    """A metric-preserving map of ``base``.

    ``torus_swap_shift`` is (e^{iθ}, e^{iφ}) ↦ (e^{iφ}, e^{i(θ+π)}) on the
    torus of two unit circles; ``circle_rotation`` rotates by ``angle``.
    """

    kind: str
    base: ManifoldSpec
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown isometry kind {self.kind!r}")
        if not isinstance(self.base, _KINDS[self.kind]):
            raise ValueError(
                f"isometry {self.kind!r} is not defined on {type(self.base).__name__}"
            )
        if self.kind == TORUS_SWAP_SHIFT:
            two_pi = 2 * math.pi
            if abs(self.base.L1 - two_pi) > 1e-12 or abs(self.base.L2 - two_pi) > 1e-12:
                raise ValueError("torus_swap_shift needs unit circles (periods 2π)")
        if self.kind != CIRCLE_ROTATION and self.angle != 0.0:
            raise ValueError("angle is only meaningful for circle_rotation")

    @property
    def orientation_preserving(self) -> bool:
        # the swap (θ,φ) -> (φ,θ+π) has Jacobian det -1
        return self.kind in (IDENTITY, CIRCLE_ROTATION)


@dataclass(frozen=True)
class MappingTorusSpec:
    base: ManifoldSpec
    isometry: IsometrySpec
    a: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"interval length a must be positive, got {self.a!r}")
        if self.isometry.base != self.base:
            raise ValueError("isometry.base must equal base")

    @property
    def dimension(self) -> int:
        return self.base.dimension + 1


def klein_bottle(a: float, rho: float) -> MappingTorusSpec:
    base = Circle(rho)
    return MappingTorusSpec(base, IsometrySpec(CIRCLE_REFLECTION, base), a)


def t2_phi() -> MappingTorusSpec:
    base = RectTorus(2 * math.pi, 2 * math.pi)
    return MappingTorusSpec(base, IsometrySpec(TORUS_SWAP_SHIFT, base), 2 * math.pi)


def circle_rotation_torus(a: float, rho: float, angle: float) -> MappingTorusSpec:
    base = Circle(rho)
    return MappingTorusSpec(base, IsometrySpec(CIRCLE_ROTATION, base, angle), a)


def product(base: ManifoldSpec, a: float) -> MappingTorusSpec:
    return MappingTorusSpec(base, IsometrySpec(IDENTITY, base), a)


@dataclass(frozen=True)
class EigenBlock:
    nu2: float
    multiplicity: int
    action: np.ndarray = field(repr=False)
    inverse_action: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.multiplicity
        if self.nu2 < 0:
            raise ValueError("nu2 must be non-negative")
        if self.action.shape != (n, n) or self.inverse_action.shape != (n, n):
            raise ValueError("action matrices must be multiplicity x multiplicity")
        self.action.setflags(write=False)
        self.inverse_action.setflags(write=False)

    def kappa_matrix(self) -> np.ndarray:
        """I - (A + A^T)/2, symmetrised explicitly."""
        A = self.action
        return np.eye(self.multiplicity) - 0.5 * (A + A.T)


@dataclass(frozen=True)
class SpectrumStream:
    blocks: tuple
    cutoff: float
    degree: int
    base: ManifoldSpec
    components: int  # number of parallel-frame components (for tail bounds)

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def total_multiplicity(self) -> int:
        return sum(b.multiplicity for b in self.blocks)


# --------------------------------------------------------------------------
# coframe actions on parallel q-forms (these are also the harmonic actions)


def frame_basis_size(base: ManifoldSpec, q: int) -> int:
    d = base.dimension
    if q < 0 or q > d:
        return 0
    return math.comb(d, q)


def frame_action(isometry: IsometrySpec, q: int) -> np.ndarray:
    """Matrix of φ* on the parallel q-forms (dθ, dφ, dθ∧dφ, ...)."""
    n = frame_basis_size(isometry.base, q)
    if n == 0:
        return np.zeros((0, 0))
    if isometry.kind in (IDENTITY, CIRCLE_ROTATION) or q == 0:
        return np.eye(n)
    if isometry.kind == CIRCLE_REFLECTION:
        return -np.eye(1)  # dθ -> -dθ
    # torus swap-shift: φ*dθ = dφ, φ*dφ = dθ, φ*(dθ∧dφ) = -dθ∧dφ
    if q == 1:
        return np.array([[0.0, 1.0], [1.0, 0.0]])
    return -np.eye(1)


# --------------------------------------------------------------------------
# scalar spectra


def _check_cutoff(cutoff):
    if not cutoff >= 0:
        raise ValueError(f"cutoff must be non-negative, got {cutoff!r}")


def _circle_scalar_blocks(isometry: IsometrySpec, cutoff: float):
    """Yield (key, nu2, action, inverse_action) for scalar functions."""
    rho = isometry.base.radius
    yield 0, 0.0, np.eye(1), np.eye(1)
    kmax = int(math.floor(rho * math.sqrt(cutoff))) + 1
    for k in range(1, kmax + 1):
        nu2 = k * k / (rho * rho)
        if nu2 > cutoff:
            break
        # basis (cos kθ, sin kθ); columns are images
        if isometry.kind == IDENTITY:
            A = np.eye(2)
            B = np.eye(2)
        elif isometry.kind == CIRCLE_REFLECTION:
            A = np.diag([1.0, -1.0])
            B = A.copy()
        else:
            c, s = math.cos(k * isometry.angle), math.sin(k * isometry.angle)
            # cos k(θ+α) = c cos - s sin ; sin k(θ+α) = s cos + c sin
            A = np.array([[c, s], [-s, c]])
            # inverse rotation: α -> -α
            B = np.array([[c, -s], [s, c]])
        yield k * k, nu2, A, B


def _torus_shell_key(L1: float, L2: float):
    """Exact key for (2πm/L1)^2 + (2πn/L2)^2 so equal eigenvalues merge."""
    ratio2 = (L1 / L2) ** 2
    frac = Fraction(ratio2).limit_denominator(10**6)
    if abs(float(frac) - ratio2) <= 1e-13 * max(1.0, ratio2):
        return lambda m, n: Fraction(m * m) + Fraction(n * n) * frac
    return lambda m, n: (m * m, n * n)


def _torus_rep(m: int, n: int):
    """Representative of {(m,n), (-m,-n)} and the sign carried by sines."""
    if m > 0 or (m == 0 and n > 0):
        return (m, n), 1
    return (-m, -n), -1


def _torus_lattice(L1: float, L2: float, cutoff: float):
    w1, w2 = 2 * math.pi / L1, 2 * math.pi / L2
    key = _torus_shell_key(L1, L2)
    mmax = int(math.floor(math.sqrt(cutoff) / w1)) + 1
    nmax = int(math.floor(math.sqrt(cutoff) / w2)) + 1
    shells: dict = {}
    for m in range(0, mmax + 1):
        for n in range(-nmax, nmax + 1):
            if m == 0 and n < 0:
                continue
            nu2 = (w1 * m) ** 2 + (w2 * n) ** 2
            if nu2 > cutoff * (1 + 1e-14):
                continue
            shells.setdefault(key(m, n), (nu2, []))[1].append((m, n))
    return sorted(shells.values(), key=lambda item: item[0])


def _swap_shift_image(m: int, n: int, inverse: bool):
    """φ*ψ_{m,n} = (-1)^n ψ_{n,m};  (φ^{-1})*ψ_{m,n} = (-1)^m ψ_{n,m}."""
    sign = (-1) ** (m if inverse else n)
    return (n, m), sign


def _torus_scalar_blocks(isometry: IsometrySpec, cutoff: float):
    base = isometry.base
    for nu2, reps in _torus_lattice(base.L1, base.L2, cutoff):
        labels = []  # (rep, part) with part 'c' or 's'
        for rep in reps:
            if rep == (0, 0):
                labels.append((rep, "c"))
            else:
                labels.append((rep, "c"))
                labels.append((rep, "s"))
        index = {lab: i for i, lab in enumerate(labels)}
        dim = len(labels)
        if isometry.kind == IDENTITY:
            A = np.eye(dim)
            B = np.eye(dim)
        else:
            A = np.zeros((dim, dim))
            B = np.zeros((dim, dim))
            for mat, inverse in ((A, False), (B, True)):
                for (rep, part), col in index.items():
                    (m2, n2), sign = _swap_shift_image(*rep, inverse=inverse)
                    rep2, flip = _torus_rep(m2, n2)
                    # cos is even under (m,n)->(-m,-n), sin is odd
                    value = sign * (flip if part == "s" else 1)
                    mat[index[(rep2, part)], col] = value
        key = tuple(sorted(reps))
        yield key, nu2, A, B


def _scalar_blocks(isometry: IsometrySpec, cutoff: float):
    if isinstance(isometry.base, Circle):
        return _circle_scalar_blocks(isometry, cutoff)
    return _torus_scalar_blocks(isometry, cutoff)


def _check_orthogonal(A: np.ndarray, B: np.ndarray):
    n = A.shape[0]
    if np.abs(A.T @ A - np.eye(n)).max(initial=0.0) > ORTHO_TOL:
        raise AssertionError("pull-back action is not orthogonal")
    if np.abs(B - A.T).max(initial=0.0) > ORTHO_TOL:
        raise AssertionError("inverse action differs from the transpose")


def form_spectrum(isometry: IsometrySpec, q: int, cutoff: float) -> SpectrumStream:
    """Blocks of Δ on q-forms of the base with the pull-back of ``isometry``.

    On a flat base the q-form Laplacian acts componentwise in a parallel
    coframe, so each block is (coframe action) ⊗ (scalar action).
    """
    _check_cutoff(cutoff)
    base = isometry.base
    if q < 0 or q > base.dimension:
        raise ValueError(f"form degree {q} outside 0..{base.dimension}")
    F = frame_action(isometry, q)
    Finv = F.T
    blocks = []
    for _, nu2, A, B in _scalar_blocks(isometry, cutoff):
        Aq = np.kron(F, A)
        Bq = np.kron(Finv, B)
        _check_orthogonal(Aq, Bq)
        blocks.append(EigenBlock(nu2, Aq.shape[0], Aq, Bq))
    return SpectrumStream(tuple(blocks), cutoff, q, base, F.shape[0])


def circle_spectrum(rho: float, q: int, isometry: IsometrySpec, cutoff: float) -> SpectrumStream:
    if not isinstance(isometry.base, Circle) or isometry.base.radius != rho:
        raise ValueError("isometry must act on Circle(rho)")
    return form_spectrum(isometry, q, cutoff)


def torus_spectrum(L1: float, L2: float, q: int, isometry: IsometrySpec,
                   cutoff: float) -> SpectrumStream:
    if not isinstance(isometry.base, RectTorus) or (isometry.base.L1, isometry.base.L2) != (L1, L2):
        raise ValueError("isometry must act on RectTorus(L1, L2)")
    return form_spectrum(isometry, q, cutoff)


def _block_diag(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    n, m = X.shape[0], Y.shape[0]
    out = np.zeros((n + m, n + m))
    out[:n, :n] = X
    out[n:, n:] = Y
    return out


def tilde_spectrum(spec: MappingTorusSpec, q: int, cutoff: float) -> SpectrumStream:
    """Spectrum of Δ on Ω^q(M) ⊕ Ω^{q-1}(M), merged per eigenvalue."""
    d = spec.base.dimension
    if q < 0 or q > d + 1:
        raise ValueError(f"form degree {q} outside 0..{d + 1}")
    parts = [form_spectrum(spec.isometry, p, cutoff) for p in (q, q - 1) if 0 <= p <= d]
    merged: dict = {}
    for part in parts:
        for blk in part:
            # both degrees come from the same scalar shells, so nu2 floats coincide
            merged.setdefault(blk.nu2, []).append(blk)
    blocks = []
    for key in sorted(merged):
        group = merged[key]
        A, B = group[0].action, group[0].inverse_action
        for blk in group[1:]:
            A, B = _block_diag(A, blk.action), _block_diag(B, blk.inverse_action)
        blocks.append(EigenBlock(group[0].nu2, A.shape[0], A, B))
    comps = sum(p.components for p in parts)
    return SpectrumStream(tuple(blocks), cutoff, q, spec.base, comps)


# --------------------------------------------------------------------------
# harmonic forms


@dataclass(frozen=True)
class HarmonicActionSet:
    actions: tuple  # action_q for q = 0..dim
    betti: tuple
    ell: tuple
    s_blocks: tuple  # (I - (A+A^T)/2) restricted to the complement of the fixed space

    @property
    def dimension(self) -> int:
        return len(self.actions) - 1

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** q * b for q, b in enumerate(self.betti))


def _fixed_dimension(A: np.ndarray) -> int:
    if A.shape[0] == 0:
        return 0
    sv = np.linalg.svd(A - np.eye(A.shape[0]), compute_uv=False)
    return int(np.sum(sv < CLUSTER_TOL))


def _s_block(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    K = np.eye(n) - 0.5 * (A + A.T)
    w, V = np.linalg.eigh(K)
    keep = w > CLUSTER_TOL
    Vk = V[:, keep]
    S = Vk.T @ K @ Vk
    return 0.5 * (S + S.T)


def harmonic_actions(spec: MappingTorusSpec) -> HarmonicActionSet:
    """Pull-back on harmonic forms; on a flat base these are the parallel forms."""
    d = spec.base.dimension
    actions, betti, ell, sblocks = [], [], [], []
    for q in range(d + 1):
        A = frame_action(spec.isometry, q)
        A.setflags(write=False)
        actions.append(A)
        betti.append(A.shape[0])
        ell.append(_fixed_dimension(A))
        sblocks.append(_s_block(A))
    return HarmonicActionSet(tuple(actions), tuple(betti), tuple(ell), tuple(sblocks))


def fixed_dims(h: HarmonicActionSet) -> tuple:
    return tuple((b, l) for b, l in zip(h.betti, h.ell))
