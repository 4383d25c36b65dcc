#!/usr/bin/env python
# -*- coding: utf-8 -*-
# ---------------------------------------------------------------------------
"""Dense real linear algebra on symplectic vector spaces.

Conventions: vectors are ordered [q1, p1, ..., qs, ps] and the standard form is
block-diagonal with blocks [[0, -1], [1, 0]]. A pair of vectors (e, h) is called
a canonical pair when e^t Delta h = -1, so that an interleaved basis of canonical
pairs has the standard form as its pairing matrix.
"""
# ---------------------------------------------------------------------------
from __future__ import annotations
from dataclasses import dataclass, field
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from prometheus_client import Counter

from gaussian_observables.configuration import DEFAULT_CONFIG
from gaussian_observables.errors import (
    DecompositionError,
    InfeasibleComplementError,
    ShapeError,
    SymmetryError,
    ValidityError,
)

logger = logging.getLogger(__name__)

RANK_TOL = DEFAULT_CONFIG.tolerances.rank
PSD_TOL = DEFAULT_CONFIG.tolerances.psd
SYMMETRY_TOL = DEFAULT_CONFIG.tolerances.symmetry
RESIDUAL_TOL = DEFAULT_CONFIG.tolerances.residual
ILL_CONDITIONED_FACTOR = DEFAULT_CONFIG.tolerances.ill_conditioned_factor

decompositions_count = Counter(
    "symplectic_decompositions_total",
    "Number of extended Williamson decompositions attempted",
    labelnames=("outcome",),
)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def max_abs(matrix) -> float:
    """Max-norm of a matrix, 0 for empty input."""
    matrix = np.asarray(matrix)
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


def numerical_rank(
    values: Sequence[float],
    tol: float = RANK_TOL,
    factor: float = ILL_CONDITIONED_FACTOR,
    scale: Optional[float] = None,
) -> Tuple[int, bool]:
    """
    Count the values above tol * scale.

    Args:
        values: Nonnegative magnitudes (singular values or |eigenvalues|).
        tol: Relative threshold.
        factor: A value within this factor of the threshold makes the decision ambiguous.
        scale: Reference magnitude. Defaults to max(values).

    Returns:
        (rank, ambiguous)
    """
    values = np.abs(np.asarray(values, dtype=float))
    if scale is None:
        scale = float(values.max()) if values.size else 0.0
    if scale <= 0.0:
        return 0, False
    threshold = tol * scale
    rank = int(np.count_nonzero(values > threshold))
    ambiguous = bool(
        np.any((values > threshold / factor) & (values < threshold * factor))
    )
    return rank, ambiguous


def _canonical_signs(matrix: np.ndarray) -> np.ndarray:
    # first entry of maximal modulus in each column made positive
    matrix = np.array(matrix, dtype=float, copy=True)
    for j in range(matrix.shape[1]):
        column = np.abs(matrix[:, j])
        if not column.size or column.max() == 0.0:
            continue
        k = int(np.flatnonzero(column >= column.max() * (1 - 1e-9))[0])
        if matrix[k, j] < 0:
            matrix[:, j] = -matrix[:, j]
    return matrix


def _canonical_phase(vector: np.ndarray) -> np.ndarray:
    moduli = np.abs(vector)
    k = int(np.flatnonzero(moduli >= moduli.max() * (1 - 1e-9))[0])
    return vector * np.conj(vector[k]) / moduli[k]


def _skew_pairs(
    D: np.ndarray,
    tol: float = RANK_TOL,
    factor: float = ILL_CONDITIONED_FACTOR,
    scale: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """
    Orthonormal pairs (u_j, w_j) with D u_j = sigma_j w_j and D w_j = -sigma_j u_j.

    Values sigma_j at or below tol * scale are treated as zero. The scale defaults to the
    spectral radius of D; a D that is zero up to rounding needs an outside scale.

    Returns sigma in descending order, U and W column-stacked, and the ambiguity flag.
    """
    m = D.shape[0]
    if m == 0:
        return np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0)), False
    eigenvalues, eigenvectors = scipy.linalg.eigh(1j * D)
    spectral_radius = float(np.abs(eigenvalues).max())
    scale = spectral_radius if scale is None else max(scale, spectral_radius)
    _, ambiguous = numerical_rank(np.abs(eigenvalues), tol, factor, scale=scale)
    threshold = tol * scale
    positive = [j for j in range(m - 1, -1, -1) if eigenvalues[j] > threshold]
    if scale == 0.0:
        positive = []

    sigmas = np.array([eigenvalues[j] for j in positive], dtype=float)
    U = np.zeros((m, len(positive)))
    W = np.zeros((m, len(positive)))
    for col, j in enumerate(positive):
        v = _canonical_phase(eigenvectors[:, j])
        U[:, col] = np.sqrt(2.0) * v.real
        W[:, col] = np.sqrt(2.0) * v.imag
    return sigmas, U, W, ambiguous


def _interleave(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    out = np.zeros((U.shape[0], 2 * U.shape[1]))
    out[:, 0::2] = U
    out[:, 1::2] = W
    return out


@dataclass(frozen=True, eq=False)
class SymplecticForm:
    """The standard symplectic form on R^{2s}."""

    s: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.s

    @property
    def inverse(self) -> np.ndarray:
        return -self.matrix

    def pairing(self, z, z_prime) -> np.ndarray:
        """Delta(z, z') = z^t Delta z' for vectors or column-stacked bases."""
        return np.asarray(z).T @ self.matrix @ np.asarray(z_prime)


def block_form(s: int) -> np.ndarray:
    """Standard form as a plain array, empty for s = 0."""
    delta = np.zeros((2 * s, 2 * s))
    for j in range(s):
        delta[2 * j, 2 * j + 1] = -1.0
        delta[2 * j + 1, 2 * j] = 1.0
    return delta


def standard_form(s: int) -> SymplecticForm:
    """
    Standard symplectic form for s modes in interleaved (q, p) ordering.

    Args:
        s: Number of modes, at least 1.
    """
    if s < 1:
        raise ShapeError(f"Cannot build a symplectic form for an empty system (s={s})")
    return SymplecticForm(s=s, matrix=_frozen(block_form(s)))


def _check_square(name: str, matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"{name} must be a square matrix, got shape {matrix.shape}")


def check_skew(name: str, matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    _check_square(name, matrix)
    if max_abs(matrix + matrix.T) > tol * max(1.0, max_abs(matrix)):
        raise SymmetryError(
            f"{name} is not skew-symmetric: |{name} + {name}^t| = {max_abs(matrix + matrix.T):.3g}"
        )


def check_symmetric(name: str, matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    _check_square(name, matrix)
    if max_abs(matrix - matrix.T) > tol * max(1.0, max_abs(matrix)):
        raise SymmetryError(
            f"{name} is not symmetric: |{name} - {name}^t| = {max_abs(matrix - matrix.T):.3g}"
        )


@dataclass(frozen=True, eq=False)
class SkewCanonicalForm:
    """S^t D S = diag(Delta_{rank/2}, 0)."""

    S: np.ndarray
    rank: int
    sigmas: Tuple[float, ...]
    ambiguous: bool = False

    def __iter__(self):
        # allows ``S, r = skew_canonical(D)``
        return iter((self.S, self.rank))


def skew_canonical(D, tol: float = RANK_TOL, scale: Optional[float] = None) -> SkewCanonicalForm:
    """
    Bring a real skew-symmetric matrix to the form diag(Delta, 0) by congruence.

    The first rank columns of S come in canonical pairs scaled by 1/sqrt(sigma_j), the
    remaining columns are an orthonormal basis of the kernel. The rank counts values
    above tol * scale, scale defaulting to the spectral radius of D.
    """
    D = np.asarray(D, dtype=float)
    check_skew("D", D)
    m = D.shape[0]
    sigmas, U, W, ambiguous = _skew_pairs(D, tol, scale=scale)
    k = sigmas.size

    if k == 0:
        S = np.eye(m)
    else:
        weights = 1.0 / np.sqrt(sigmas)
        pairs = _interleave(U * weights, W * weights)
        if 2 * k < m:
            kernel = _canonical_signs(scipy.linalg.null_space(_interleave(U, W).T))
            S = np.hstack([pairs, kernel])
        else:
            S = pairs

    if ambiguous:
        logger.warning(
            "Rank decision for a skew-symmetric matrix is ill-conditioned",
            extra={"rank": 2 * k, "sigmas": sigmas.tolist()},
        )
    return SkewCanonicalForm(
        S=_frozen(S), rank=2 * k, sigmas=tuple(float(x) for x in sigmas), ambiguous=ambiguous
    )


def williamson(A, tol: float = RANK_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Williamson normal form with respect to the standard form.

    Args:
        A: Positive definite symmetric 2n x 2n matrix.

    Returns:
        (M, a) with M^t A M = diag(a_j I_2), M^t Delta M = Delta and a sorted descending.
    """
    A = np.asarray(A, dtype=float)
    check_symmetric("A", A)
    if A.shape[0] % 2:
        raise ShapeError(f"Williamson form needs an even dimension, got {A.shape[0]}")
    n = A.shape[0] // 2
    if n == 0:
        return np.zeros((0, 0)), np.zeros(0)

    eigenvalues, V = scipy.linalg.eigh(A)
    if eigenvalues.min() <= 0.0:
        raise ValidityError(
            f"Williamson form needs a positive definite matrix, min eigenvalue {eigenvalues.min():.6g}",
            float(eigenvalues.min()),
        )
    root_inv = (V / np.sqrt(eigenvalues)) @ V.T
    G = root_inv @ block_form(n) @ root_inv
    G = 0.5 * (G - G.T)

    sigmas, U, W, _ = _skew_pairs(G, tol)
    if sigmas.size != n:
        raise DecompositionError(
            f"Williamson reduction found {sigmas.size} symplectic pairs, expected {n}"
        )
    order = np.argsort(sigmas, kind="stable")
    sigmas, U, W = sigmas[order], U[:, order], W[:, order]
    scale = 1.0 / np.sqrt(sigmas)
    M = root_inv @ _interleave(U * scale, W * scale)
    return M, 1.0 / sigmas


@dataclass(frozen=True, eq=False)
class CanonicalDecomposition:
    """
    Result of the extended Williamson lemma.

    T^t alpha T = diag(a_j I_2, I/2, 0) and T^t Delta_K T = diag(Delta, 0, 0) with block
    sizes 2 s1, s2 and s3.
    """

    T: np.ndarray
    T_inv: np.ndarray
    r_delta: int
    r_alpha: int
    s1: int
    s2: int
    s3: int
    a: Tuple[float, ...]
    alpha_residual: float = 0.0
    delta_residual: float = 0.0
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def m(self) -> int:
        return self.T.shape[0]

    @property
    def blocks(self) -> Tuple[slice, slice, slice]:
        r = 2 * self.s1
        return slice(0, r), slice(r, r + self.s2), slice(r + self.s2, self.m)

    @property
    def ill_conditioned(self) -> bool:
        return bool(self.warnings)

    def alpha_blockform(self) -> np.ndarray:
        return canonical_alpha(self.a, self.s2, self.s3)

    def delta_blockform(self) -> np.ndarray:
        return canonical_delta(self.s1, self.s2 + self.s3)


def canonical_alpha(a: Sequence[float], s2: int, s3: int) -> np.ndarray:
    diagonal = [value for value in a for _ in range(2)] + [0.5] * s2 + [0.0] * s3
    return np.diag(np.asarray(diagonal, dtype=float))


def canonical_delta(s1: int, rest: int) -> np.ndarray:
    return scipy.linalg.block_diag(block_form(s1), np.zeros((rest, rest)))


def extended_williamson(
    alpha,
    delta_K,
    tol: float = RANK_TOL,
    psd_tol: float = PSD_TOL,
    residual_tol: float = RESIDUAL_TOL,
    scale: Optional[float] = None,
) -> CanonicalDecomposition:
    """
    Simultaneous canonical form of a symmetric alpha and a skew-symmetric Delta_K
    subject to alpha - (i/2) Delta_K >= 0.

    The congruence is assembled in four steps: the skew canonical form of Delta_K, an
    orthogonal diagonalisation of alpha on the kernel of Delta_K rescaled to I/2, a shear
    removing the coupling between the symplectic block and the rescaled kernel block,
    and a Williamson normal form of the remaining Schur complement.

    Both rank decisions are taken against tol * scale. The scale defaults to
    max(|alpha|, |Delta_K|, 1); callers holding K pass |K|_2^2, the size Delta_K would
    have if the columns of K were not isotropic.

    Raises:
        ValidityError: alpha - (i/2) Delta_K has an eigenvalue below -psd_tol.
        DecompositionError: the block residuals exceed residual_tol.
    """
    alpha = np.asarray(alpha, dtype=float)
    delta_K = np.asarray(delta_K, dtype=float)
    check_symmetric("alpha", alpha)
    check_skew("delta_K", delta_K)
    if alpha.shape != delta_K.shape:
        raise ShapeError(
            f"alpha {alpha.shape} and delta_K {delta_K.shape} must have the same shape"
        )
    alpha = 0.5 * (alpha + alpha.T)
    m = alpha.shape[0]
    if scale is None:
        scale = max(max_abs(alpha), max_abs(delta_K), 1.0)

    min_eigenvalue = float(scipy.linalg.eigvalsh(alpha - 0.5j * delta_K).min()) if m else 0.0
    if min_eigenvalue < -psd_tol:
        decompositions_count.labels(outcome="invalid").inc()
        raise ValidityError(
            f"alpha - (i/2) Delta_K is not positive semidefinite: "
            f"most negative eigenvalue {min_eigenvalue:.6g}",
            min_eigenvalue,
        )

    warnings: List[str] = []
    skew = skew_canonical(delta_K, tol, scale=scale)
    if skew.ambiguous:
        warnings.append("ill-conditioned: rank of Delta_K is within tolerance ambiguity")
    S = np.asarray(skew.S)
    r = skew.rank
    k = m - r

    A = S.T @ alpha @ S
    A = 0.5 * (A + A.T)

    # kernel block: orthogonal diagonalisation, nonzero part rescaled to 1/2
    if k:
        eigenvalues, V = scipy.linalg.eigh(A[r:, r:])
        order = np.argsort(-eigenvalues, kind="stable")
        eigenvalues, V = eigenvalues[order], _canonical_signs(V[:, order])
        s2, ambiguous = numerical_rank(
            eigenvalues, tol, scale=max(float(np.abs(eigenvalues).max()), scale)
        )
        if ambiguous:
            warnings.append("ill-conditioned: rank of alpha is within tolerance ambiguity")
        scales = np.ones(k)
        scales[:s2] = 1.0 / np.sqrt(2.0 * eigenvalues[:s2])
        R2 = V * scales
    else:
        s2 = 0
        R2 = np.zeros((0, 0))
    s3 = k - s2

    W = scipy.linalg.block_diag(np.eye(r), R2)
    Y = W.T @ A @ W

    # shear x -> (x, C x) removing the coupling into the I/2 block
    shear = np.eye(m)
    if r and s2:
        shear[r : r + s2, :r] = -2.0 * Y[:r, r : r + s2].T
    Z = shear.T @ Y @ shear
    Z = 0.5 * (Z + Z.T)

    if r:
        M, a = williamson(Z[:r, :r], tol)
    else:
        M, a = np.zeros((0, 0)), np.zeros(0)

    T = S @ W @ shear @ scipy.linalg.block_diag(M, np.eye(k))
    decomposition_a = tuple(float(x) for x in a)
    alpha_residual = max_abs(T.T @ alpha @ T - canonical_alpha(decomposition_a, s2, s3))
    delta_residual = max_abs(T.T @ delta_K @ T - canonical_delta(r // 2, k))

    bound = residual_tol * max(1.0, max(decomposition_a, default=1.0))
    if alpha_residual > bound or delta_residual > bound:
        decompositions_count.labels(outcome="residual_failure").inc()
        raise DecompositionError(
            f"Canonical form residuals too large: alpha {alpha_residual:.3g}, "
            f"Delta_K {delta_residual:.3g}",
            max(alpha_residual, delta_residual),
        )

    for message in warnings:
        logger.warning(message, extra={"m": m, "r_delta": r, "s2": s2})
    decompositions_count.labels(outcome="ok").inc()

    return CanonicalDecomposition(
        T=_frozen(T),
        T_inv=_frozen(scipy.linalg.inv(T)) if m else _frozen(np.zeros((0, 0))),
        r_delta=r,
        r_alpha=r + s2,
        s1=r // 2,
        s2=s2,
        s3=s3,
        a=decomposition_a,
        alpha_residual=alpha_residual,
        delta_residual=delta_residual,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """An ordered basis of a subspace of R^{ambient_dim}, stored column-wise."""

    ambient_dim: int
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors.reshape(-1, 1)
        if vectors.size == 0:
            vectors = np.zeros((self.ambient_dim, 0))
        if vectors.shape[0] != self.ambient_dim:
            raise ShapeError(
                f"Subspace vectors have length {vectors.shape[0]}, expected {self.ambient_dim}"
            )
        if vectors.shape[1]:
            singular_values = scipy.linalg.svdvals(vectors)
            if singular_values.min() <= RANK_TOL * singular_values.max():
                raise ShapeError("Subspace vectors are linearly dependent")
        object.__setattr__(self, "vectors", _frozen(vectors))

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[float]], ambient_dim: Optional[int] = None):
        vectors = [np.asarray(v, dtype=float) for v in vectors]
        if ambient_dim is None:
            if not vectors:
                raise ShapeError("Ambient dimension required for an empty subspace")
            ambient_dim = vectors[0].size
        if not vectors:
            return cls.empty(ambient_dim)
        return cls(ambient_dim, np.column_stack(vectors))

    @classmethod
    def empty(cls, ambient_dim: int) -> SubspaceBasis:
        return cls(ambient_dim, np.zeros((ambient_dim, 0)))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def join(self, *others: SubspaceBasis) -> SubspaceBasis:
        """Basis of the sum, assuming the summands are independent."""
        return SubspaceBasis(
            self.ambient_dim, np.hstack([self.vectors] + [o.vectors for o in others])
        )

    def projector(self) -> np.ndarray:
        if not self.dim:
            return np.zeros((self.ambient_dim, self.ambient_dim))
        Q = scipy.linalg.orth(self.vectors)
        return Q @ Q.T


def same_span(first: SubspaceBasis, second: SubspaceBasis, tol: float = 1e-9) -> bool:
    """True when both bases span the same subspace."""
    if first.dim != second.dim:
        return False
    return max_abs(first.projector() - second.projector()) < tol


def pairing_matrix(first: SubspaceBasis, second: SubspaceBasis, delta: SymplecticForm) -> np.ndarray:
    return delta.pairing(first.vectors, second.vectors)


def is_isotropic(L: SubspaceBasis, delta: SymplecticForm, tol: float = 1e-9) -> bool:
    return max_abs(pairing_matrix(L, L, delta)) <= tol * max(1.0, max_abs(L.vectors) ** 2)


def _check_ambient(L: SubspaceBasis, delta: SymplecticForm) -> None:
    if L.ambient_dim != delta.dim:
        raise ShapeError(
            f"Subspace lives in R^{L.ambient_dim}, symplectic form acts on R^{delta.dim}"
        )


def symplectic_complement(L: SubspaceBasis, delta: SymplecticForm) -> SubspaceBasis:
    """
    Basis of {z : z^t Delta z' = 0 for all z' in L}.
    """
    _check_ambient(L, delta)
    if not L.dim:
        return SubspaceBasis(delta.dim, np.eye(delta.dim))
    constraints = L.vectors.T @ delta.matrix.T
    kernel = scipy.linalg.null_space(constraints, rcond=RANK_TOL)
    return SubspaceBasis(delta.dim, _canonical_signs(kernel))


def isotropic_partner(
    L: SubspaceBasis,
    avoid: SubspaceBasis,
    delta: SymplecticForm,
    orthogonal_to: Optional[SubspaceBasis] = None,
    tol: float = RANK_TOL,
) -> SubspaceBasis:
    """
    Isotropic L' with span(L') disjoint from span(L + avoid) and e_j^t Delta h_k = -delta_jk.

    Seeds are taken Euclidean-orthogonal to L + avoid when that yields a solvable pairing,
    otherwise from the least-norm solution. The seeds are then made isotropic by a shear
    along L, which keeps the pairing. With orthogonal_to given, L' lies in its symplectic
    complement.

    Raises:
        InfeasibleComplementError: L is not isotropic, the dimension count fails, or the
            partner cannot be made disjoint from L + avoid.
    """
    _check_ambient(L, delta)
    _check_ambient(avoid, delta)
    k = L.dim
    if not k:
        return SubspaceBasis.empty(delta.dim)
    if not is_isotropic(L, delta):
        raise InfeasibleComplementError("Subspace L is not isotropic")
    if 2 * k + avoid.dim > delta.dim:
        raise InfeasibleComplementError(
            f"Cannot fit a {k}-dimensional partner: 2*{k} + {avoid.dim} > {delta.dim}"
        )

    E = L.vectors
    taken = scipy.linalg.orth(np.hstack([E, avoid.vectors]))
    constraints = [taken.T]
    if orthogonal_to is not None and orthogonal_to.dim:
        _check_ambient(orthogonal_to, delta)
        search = symplectic_complement(orthogonal_to, delta).vectors
        constraints.append(orthogonal_to.vectors.T @ delta.matrix.T)
    else:
        search = np.eye(delta.dim)

    pairing = E.T @ delta.matrix
    target = -np.eye(k)

    seeds = scipy.linalg.null_space(np.vstack(constraints), rcond=tol)
    Y = None
    if seeds.shape[1] >= k:
        reduced = pairing @ seeds
        rank, _ = numerical_rank(scipy.linalg.svdvals(reduced), tol, scale=max(1.0, max_abs(reduced)))
        if rank == k:
            Y = seeds @ scipy.linalg.lstsq(reduced, target)[0]
    if Y is None:
        reduced = pairing @ search
        rank, _ = numerical_rank(scipy.linalg.svdvals(reduced), tol, scale=max(1.0, max_abs(reduced)))
        if rank < k:
            raise InfeasibleComplementError("Pairing with L is degenerate on the search space")
        Y = search @ scipy.linalg.lstsq(reduced, target)[0]
        logger.debug("Isotropic partner seeded from least-norm solution", extra={"k": k})

    gram = Y.T @ delta.matrix @ Y
    H = Y - 0.5 * E @ gram

    joint = scipy.linalg.svdvals(np.hstack([taken, H]))
    if joint.min() <= tol * max(1.0, joint.max()) * 1e2:
        raise InfeasibleComplementError("Partner subspace intersects span(L + avoid)")

    residual = max(max_abs(E.T @ delta.matrix @ H - target), max_abs(H.T @ delta.matrix @ H))
    if residual > RESIDUAL_TOL * max(1.0, max_abs(H) ** 2):
        raise DecompositionError(f"Isotropic partner residual {residual:.3g}", residual)
    return SubspaceBasis(delta.dim, H)
