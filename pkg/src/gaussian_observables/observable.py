#!/usr/bin/env python
# -*- coding: utf-8 -*-
# ---------------------------------------------------------------------------
"""Gaussian observables: the triple (l, K, alpha) and what can be read off it.

An observable on s modes with outcome space R^m has operator characteristic
function exp(i R K w - w^t alpha w / 2) times the phase exp(i l^t w). K is 2s x m
and alpha is m x m symmetric.
"""
# ---------------------------------------------------------------------------
from __future__ import annotations
from dataclasses import dataclass, field, replace
import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from prometheus_client import Counter

from gaussian_observables.configuration import DEFAULT_CONFIG
from gaussian_observables.errors import (
    ColumnRankError,
    ShapeError,
    SymmetryError,
    TypeMismatchError,
    ValidityError,
)
from gaussian_observables.symplectic import (
    CanonicalDecomposition,
    SymplecticForm,
    extended_williamson,
    max_abs,
    numerical_rank,
    standard_form,
)

logger = logging.getLogger(__name__)

validations_count = Counter(
    "observable_validations_total",
    "Number of observable validity checks",
    labelnames=("result",),
)


@dataclass(frozen=True, eq=False)
class GaussianObservable:
    """
    A Gaussian observable.

    :param s: Number of quantum modes.
    :param K: 2s x m real matrix with full column rank.
    :param alpha: m x m real symmetric noise matrix.
    :param l: Outcome offset, zero when omitted.
    :param label: Free text carried through files and reports.

    The validity condition is not enforced here; use ``validate`` or ``require_valid``.
    """

    s: int
    K: np.ndarray
    alpha: np.ndarray
    l: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        tol = DEFAULT_CONFIG.tolerances
        if self.s < 1:
            raise ShapeError(f"Observable needs at least one mode, got s={self.s}")
        K = np.array(self.K, dtype=float, ndmin=2)
        alpha = np.array(self.alpha, dtype=float, ndmin=2)
        if K.shape[0] != 2 * self.s:
            raise ShapeError(f"K has {K.shape[0]} rows, expected 2s = {2 * self.s}")
        m = K.shape[1]
        if m < 1:
            raise ShapeError("K must have at least one column")
        if alpha.shape != (m, m):
            raise ShapeError(f"alpha has shape {alpha.shape}, expected ({m}, {m})")
        if max_abs(alpha - alpha.T) > tol.symmetry:
            raise SymmetryError(
                f"alpha is not symmetric: |alpha - alpha^t| = {max_abs(alpha - alpha.T):.3g}"
            )
        singular_values = scipy.linalg.svdvals(K)
        if singular_values.min() <= tol.rank * singular_values.max():
            raise ColumnRankError(
                f"K does not have full column rank: singular values {singular_values.tolist()}"
            )
        l = np.zeros(m) if self.l is None else np.array(self.l, dtype=float).reshape(-1)
        if l.shape != (m,):
            raise ShapeError(f"l has length {l.size}, expected m = {m}")

        for name, value in (("K", K), ("alpha", 0.5 * (alpha + alpha.T)), ("l", l)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def m(self) -> int:
        return self.K.shape[1]

    @property
    def delta(self) -> SymplecticForm:
        return standard_form(self.s)

    @property
    def delta_K(self) -> np.ndarray:
        """Commutator matrix K^t Delta K of the measured combinations R K."""
        return self.K.T @ self.delta.matrix @ self.K

    @property
    def rank_scale(self) -> float:
        """Reference size for rank decisions on alpha and Delta_K: max(|K|_2^2, |alpha|)."""
        return max(float(scipy.linalg.norm(self.K, 2)) ** 2, max_abs(self.alpha))

    def with_offset(self, l: Sequence[float]) -> GaussianObservable:
        return replace(self, l=np.asarray(l, dtype=float))


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    min_eigenvalue: float
    message: str


def validate(obs: GaussianObservable, tol: float = DEFAULT_CONFIG.tolerances.psd) -> ValidityReport:
    """
    Check alpha + (i/2) Delta_K >= -tol.

    Only one sign is checked: the matrix for the other sign is the complex conjugate
    and has the same spectrum.
    """
    hermitian = obs.alpha + 0.5j * obs.delta_K
    min_eigenvalue = float(scipy.linalg.eigvalsh(hermitian).min())
    valid = min_eigenvalue >= -tol
    if valid:
        message = f"valid: min eigenvalue of alpha + (i/2) Delta_K is {min_eigenvalue:.6g}"
    else:
        message = (
            f"invalid: alpha + (i/2) Delta_K has min eigenvalue {min_eigenvalue:.6g} < -{tol:g}"
        )
    validations_count.labels(result="valid" if valid else "invalid").inc()
    logger.debug(message, extra={"s": obs.s, "m": obs.m, "label": obs.label})
    return ValidityReport(valid=valid, min_eigenvalue=min_eigenvalue, message=message)


def require_valid(obs: GaussianObservable, tol: float = DEFAULT_CONFIG.tolerances.psd) -> ValidityReport:
    report = validate(obs, tol)
    if not report.valid:
        raise ValidityError(report.message, report.min_eigenvalue)
    return report


@dataclass(frozen=True, eq=False)
class Type1Block:
    """
    Symplectic block: canonical pairs with Williamson values a_j.

    ``beta`` and ``prefactor`` are given in the original coordinates when the whole
    observable is of type 1 and in canonical block coordinates otherwise.
    """

    s1: int
    a: Tuple[float, ...]
    subtype: str  # "1a", "1b" or "intermediate"
    beta: np.ndarray
    prefactor: float
    coordinates: str = "canonical"


@dataclass(frozen=True, eq=False)
class Type2Block:
    s2: int
    alpha_block: np.ndarray


@dataclass(frozen=True)
class Type3Block:
    s3: int


@dataclass(frozen=True, eq=False)
class Classification:
    decomposition: CanonicalDecomposition
    type1: Optional[Type1Block] = None
    type2: Optional[Type2Block] = None
    type3: Optional[Type3Block] = None
    bounded: bool = True
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def s1(self) -> int:
        return self.decomposition.s1

    @property
    def s2(self) -> int:
        return self.decomposition.s2

    @property
    def s3(self) -> int:
        return self.decomposition.s3

    @property
    def summary(self) -> str:
        """Type label such as "Type 1b" or "Type 1a + Type 3"."""
        labels = []
        if self.type1 is not None:
            labels.append("Type 1" if self.type1.subtype == "intermediate" else f"Type {self.type1.subtype}")
        if self.type2 is not None:
            labels.append("Type 2")
        if self.type3 is not None:
            labels.append("Type 3")
        return " + ".join(labels)


def _type1_subtype(a: Sequence[float], tol: float) -> str:
    excess = [value - 0.5 for value in a]
    pure = [abs(x) <= tol * max(1.0, abs(value)) for x, value in zip(excess, a)]
    if all(pure):
        return "1b"
    if not any(pure):
        return "1a"
    return "intermediate"


def canonical_decomposition(
    obs: GaussianObservable,
    tol: float = DEFAULT_CONFIG.tolerances.rank,
    psd_tol: float = DEFAULT_CONFIG.tolerances.psd,
) -> CanonicalDecomposition:
    """Extended Williamson form of (alpha, Delta_K) with ranks measured against |K|^2."""
    return extended_williamson(obs.alpha, obs.delta_K, tol=tol, psd_tol=psd_tol, scale=obs.rank_scale)


def classify(
    obs: GaussianObservable,
    tol: float = DEFAULT_CONFIG.tolerances.rank,
    psd_tol: float = DEFAULT_CONFIG.tolerances.psd,
) -> Classification:
    """
    Split the observable into its type-1, type-2 and type-3 parts.

    Absent blocks are None. The type-1 subtype follows from the Williamson values:
    alpha + (i/2) Delta restricted to the block has eigenvalues a_j -+ 1/2, so it has
    rank s1 exactly when every a_j = 1/2 (1b) and is nondegenerate when every a_j > 1/2 (1a).
    """
    decomposition = canonical_decomposition(obs, tol, psd_tol)

    type1 = None
    if decomposition.s1:
        subtype = _type1_subtype(decomposition.a, DEFAULT_CONFIG.tolerances.residual)
        if decomposition.s1 == obs.s and obs.m == 2 * obs.s:
            core = core_type1(obs)
            beta, prefactor, coordinates = core.beta, core.prefactor, "original"
        else:
            beta = np.diag(np.repeat(decomposition.a, 2))
            prefactor = (2 * math.pi) ** (-decomposition.s1)
            coordinates = "canonical"
        type1 = Type1Block(
            s1=decomposition.s1,
            a=decomposition.a,
            subtype=subtype,
            beta=beta,
            prefactor=prefactor,
            coordinates=coordinates,
        )
    type2 = (
        Type2Block(s2=decomposition.s2, alpha_block=0.5 * np.eye(decomposition.s2))
        if decomposition.s2
        else None
    )
    type3 = Type3Block(s3=decomposition.s3) if decomposition.s3 else None

    classification = Classification(
        decomposition=decomposition,
        type1=type1,
        type2=type2,
        type3=type3,
        bounded=decomposition.s3 == 0,
        warnings=decomposition.warnings,
    )
    logger.info(
        "Classified observable",
        extra={
            "label": obs.label,
            "summary": classification.summary,
            "s1": classification.s1,
            "s2": classification.s2,
            "s3": classification.s3,
        },
    )
    return classification


def is_bounded_density(obs: GaussianObservable) -> bool:
    """True when the POVM density m(0) is a bounded operator, i.e. alpha has full rank."""
    return classify(obs).bounded


@dataclass(frozen=True)
class DensityNorm:
    """Operator norm of m(0); ``value`` is infinite for an unbounded density."""

    value: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def density_norm(obs: GaussianObservable, classification: Optional[Classification] = None) -> DensityNorm:
    """
    Operator norm of the covariant core m(0).

    In canonical coordinates the density factorises into a scaled state on the type-1
    block and Gaussian functions on the type-2 block, so that

        |m(0)| = |det T| (2 pi)^(-s1) pi^(-s2/2) prod_j (a_j + 1/2)^(-1).

    The offset l does not enter.
    """
    classification = classification or classify(obs)
    decomposition = classification.decomposition
    if decomposition.s3:
        return DensityNorm(value=math.inf)
    value = abs(float(np.linalg.det(decomposition.T)))
    value *= (2 * math.pi) ** (-decomposition.s1) * math.pi ** (-decomposition.s2 / 2)
    for a in decomposition.a:
        value /= a + 0.5
    return DensityNorm(value=value)


def k1_matrix(obs: GaussianObservable) -> np.ndarray:
    """K1 = Delta^-1 K (K^t K)^-1, the map from outcomes to Weyl displacements of m(0)."""
    return obs.delta.inverse @ obs.K @ scipy.linalg.inv(obs.K.T @ obs.K)


def covariant_core_shift(obs: GaussianObservable, z: Sequence[float]) -> np.ndarray:
    """Displacement K1 z with m(z) = W(K1 z) m(0) W(K1 z)^*."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (obs.m,):
        raise ShapeError(f"Outcome point has length {z.size}, expected m = {obs.m}")
    return k1_matrix(obs) @ z


@dataclass(frozen=True, eq=False)
class CoreType1:
    prefactor: float
    beta: np.ndarray


def core_type1(obs: GaussianObservable) -> CoreType1:
    """
    m(0) = prefactor * rho_beta for an observable of pure type 1.

    Raises:
        TypeMismatchError: K is not square or Delta_K is degenerate.
    """
    if obs.m != 2 * obs.s:
        raise TypeMismatchError(f"Type 1 core needs m = 2s, got m={obs.m}, s={obs.s}")
    rank, _ = numerical_rank(scipy.linalg.svdvals(obs.delta_K), scale=obs.rank_scale)
    if rank != obs.m:
        raise TypeMismatchError(f"Type 1 core needs nondegenerate Delta_K, rank is {rank}")
    K_inv = scipy.linalg.inv(obs.K)
    beta = K_inv.T @ obs.alpha @ K_inv
    prefactor = abs(float(np.linalg.det(k1_matrix(obs)))) / (2 * math.pi) ** obs.s
    return CoreType1(prefactor=prefactor, beta=0.5 * (beta + beta.T))


@dataclass(frozen=True, eq=False)
class ColumnReduction:
    """K = K_reduced @ B with K_reduced made of the independent columns listed in ``kept``."""

    K_reduced: np.ndarray
    B: np.ndarray
    rank: int
    kept: Tuple[int, ...]


def reduce_columns(K, tol: float = DEFAULT_CONFIG.tolerances.rank) -> ColumnReduction:
    """Select a maximal independent set of columns of K by pivoted QR."""
    K = np.asarray(K, dtype=float)
    _, R, pivots = scipy.linalg.qr(K, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    rank, _ = numerical_rank(diagonal, tol)
    kept = tuple(sorted(int(p) for p in pivots[:rank]))
    K_reduced = K[:, list(kept)]
    B = scipy.linalg.lstsq(K_reduced, K)[0] if rank else np.zeros((0, K.shape[1]))
    return ColumnReduction(K_reduced=K_reduced, B=B, rank=rank, kept=kept)


def _position_selector(s: int) -> np.ndarray:
    K = np.zeros((2 * s, s))
    for j in range(s):
        K[2 * j, j] = 1.0
    return K


def sharp_homodyne(s: int) -> GaussianObservable:
    """Joint measurement of q_1..q_s without noise."""
    return GaussianObservable(s=s, K=_position_selector(s), alpha=np.zeros((s, s)), label="sharp_homodyne")


def noisy_homodyne(s: int, noise: Union[float, np.ndarray]) -> GaussianObservable:
    """Joint measurement of q_1..q_s with Gaussian classical noise of covariance ``noise``."""
    alpha = np.array(noise, dtype=float, ndmin=2)
    if alpha.shape == (1, 1) and s > 1:
        alpha = alpha[0, 0] * np.eye(s)
    obs = GaussianObservable(s=s, K=_position_selector(s), alpha=alpha, label="noisy_homodyne")
    require_valid(obs)
    return obs


def heterodyne_vacuum(s: int) -> GaussianObservable:
    return GaussianObservable(s=s, K=np.eye(2 * s), alpha=0.5 * np.eye(2 * s), label="heterodyne_vacuum")


def heterodyne_thermal(s: int, occupations: Sequence[float]) -> GaussianObservable:
    """Heterodyne detection with thermal noise of mean photon numbers N_j per mode."""
    occupations = np.asarray(occupations, dtype=float).reshape(-1)
    if occupations.shape != (s,):
        raise ShapeError(f"Expected {s} occupation numbers, got {occupations.size}")
    if np.any(occupations < 0):
        raise ValidityError(f"Occupation numbers must be nonnegative, got {occupations.tolist()}")
    alpha = np.diag(np.repeat(occupations + 0.5, 2))
    return GaussianObservable(s=s, K=np.eye(2 * s), alpha=alpha, label="heterodyne_thermal")
