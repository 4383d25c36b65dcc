#!/usr/bin/env python
# -*- coding: utf-8 -*-
# ---------------------------------------------------------------------------
"""Truncated Fock-space oracle.

Operators on one or two modes are represented by matrices over photon numbers
0..cutoff per mode, so a single mode has dimension cutoff + 1. Quadratures are
q = (a + a^+)/sqrt(2) and p = (a - a^+)/(i sqrt(2)), giving [q, p] = i and
W(z) W(z') W(z)^* = exp(i z^t Delta z') W(z') for W(z) = exp(i R^t z).

Single-mode Weyl matrices use the rotation identity
cos(t) q + sin(t) p = D_t q D_t^*, D_t = exp(i t n), which holds exactly for the
truncated matrices. A weighted sum of Weyl matrices therefore only needs the
spectrum of the truncated q.
"""
# ---------------------------------------------------------------------------
from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from prometheus_client import Counter, Histogram

from gaussian_observables.configuration import DEFAULT_CONFIG, OracleConfig
from gaussian_observables.errors import ShapeError, TypeMismatchError
from gaussian_observables.naimark import NaimarkExtension
from gaussian_observables.observable import GaussianObservable, covariant_core_shift
from gaussian_observables.statistics import GaussianState
from gaussian_observables.symplectic import block_form, max_abs, numerical_rank

logger = logging.getLogger(__name__)

weyl_evaluations_count = Counter(
    "oracle_weyl_evaluations_total", "Number of truncated Weyl operators summed by the oracle"
)
quadrature_seconds = Histogram(
    "oracle_quadrature_seconds", "Wall time of Fourier-inversion quadratures"
)

MAX_MODES = 2


@dataclass(frozen=True, eq=False)
class FockOperator:
    """A matrix on the truncated Fock space of ``modes`` modes."""

    modes: int
    cutoff: int
    matrix: np.ndarray
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def low_block(self, max_photons: int) -> np.ndarray:
        """Restriction to basis states with at most ``max_photons`` photons in every mode."""
        rows = low_indices(self.modes, self.cutoff, max_photons)
        return self.matrix[np.ix_(rows, rows)]


def low_indices(modes: int, cutoff: int, max_photons: int) -> np.ndarray:
    counts = np.arange(cutoff + 1)
    if modes == 1:
        return np.flatnonzero(counts <= max_photons)
    first, second = np.meshgrid(counts, counts, indexing="ij")
    return np.flatnonzero((first.reshape(-1) <= max_photons) & (second.reshape(-1) <= max_photons))


def _check_modes(modes: int) -> None:
    if modes < 1 or modes > MAX_MODES:
        raise ShapeError(f"The Fock oracle supports 1 or {MAX_MODES} modes, got {modes}")


def _check_cutoff(cutoff: int) -> None:
    if cutoff < 1:
        raise ShapeError(f"Cutoff must be at least 1, got {cutoff}")


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)


def quadratures(modes: int, cutoff: int) -> List[FockOperator]:
    """Truncated q_1, p_1, ..., q_modes, p_modes."""
    _check_modes(modes)
    _check_cutoff(cutoff)
    a = annihilation(cutoff)
    q = (a + a.conj().T) / math.sqrt(2)
    p = (a - a.conj().T) / (1j * math.sqrt(2))
    identity = np.eye(cutoff + 1)
    operators = []
    for j in range(modes):
        for single in (q, p):
            factors = [single if k == j else identity for k in range(modes)]
            matrix = factors[0]
            for factor in factors[1:]:
                matrix = np.kron(matrix, factor)
            operators.append(FockOperator(modes=modes, cutoff=cutoff, matrix=matrix))
    return operators


@lru_cache(maxsize=16)
def _position_spectrum(cutoff: int) -> Tuple[np.ndarray, np.ndarray]:
    a = annihilation(cutoff).real
    eigenvalues, V = scipy.linalg.eigh((a + a.T) / math.sqrt(2))
    eigenvalues.setflags(write=False)
    V.setflags(write=False)
    return eigenvalues, V


def _weyl_sum(vectors: np.ndarray, coefficients: np.ndarray, cutoff: int, chunk: int = 4096) -> np.ndarray:
    """sum_i c_i W(v_i) for single-mode phase-space vectors v_i."""
    eigenvalues, V = _position_spectrum(cutoff)
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    coefficients = np.asarray(coefficients, dtype=complex).reshape(-1)
    radius = np.hypot(vectors[:, 0], vectors[:, 1])
    angle = np.arctan2(vectors[:, 1], vectors[:, 0])

    shifts = np.arange(-cutoff, cutoff + 1)
    phases = np.zeros((shifts.size, eigenvalues.size), dtype=complex)
    for start in range(0, radius.size, chunk):
        block = slice(start, start + chunk)
        rotations = np.exp(1j * np.outer(shifts, angle[block])) * coefficients[block]
        phases += rotations @ np.exp(1j * np.outer(radius[block], eigenvalues))
    weyl_evaluations_count.inc(radius.size)

    index = np.arange(cutoff + 1)
    shift_index = index[:, None] - index[None, :] + cutoff
    return np.einsum("jl,kl,jkl->jk", V, V, phases[shift_index])


def validated_radius(cutoff: int, config: OracleConfig = DEFAULT_CONFIG.oracle) -> float:
    """Largest |z| for which Weyl matrices are trusted, scaled like sqrt(cutoff)."""
    return config.validated_radius * math.sqrt(cutoff / config.cutoff)


def weyl_matrix(z: Sequence[float], cutoff: int, config: OracleConfig = DEFAULT_CONFIG.oracle) -> FockOperator:
    """
    Truncated W(z) = exp(i R^t z) for one or two modes.

    Two-mode matrices are Kronecker products, the truncated generators of different
    modes commute.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size % 2:
        raise ShapeError(f"Phase-space vector must have even length, got {z.size}")
    modes = z.size // 2
    _check_modes(modes)
    _check_cutoff(cutoff)

    matrix = _weyl_sum(z[:2], [1.0], cutoff)
    for j in range(1, modes):
        matrix = np.kron(matrix, _weyl_sum(z[2 * j : 2 * j + 2], [1.0], cutoff))

    warnings: Tuple[str, ...] = ()
    radius = validated_radius(cutoff, config)
    if np.linalg.norm(z) > radius:
        message = f"|z| = {np.linalg.norm(z):.3g} exceeds the validated radius {radius:.3g} at cutoff {cutoff}"
        logger.warning(message, extra={"cutoff": cutoff})
        warnings = (message,)
    return FockOperator(modes=modes, cutoff=cutoff, matrix=matrix, warnings=warnings)


def weyl_relation_residual(z: Sequence[float], z_prime: Sequence[float], cutoff: int) -> float:
    """Max deviation from W(z) W(z') W(z)^* = exp(i z^t Delta z') W(z') on the lower third."""
    z = np.asarray(z, dtype=float)
    z_prime = np.asarray(z_prime, dtype=float)
    W = weyl_matrix(z, cutoff)
    W_prime = weyl_matrix(z_prime, cutoff)
    lhs = W.matrix @ W_prime.matrix @ W.matrix.conj().T
    phase = np.exp(1j * z @ block_form(W.modes) @ z_prime)
    rows = low_indices(W.modes, cutoff, cutoff // 3)
    return max_abs((lhs - phase * W_prime.matrix)[np.ix_(rows, rows)])


def _require_single_mode(obs: GaussianObservable) -> None:
    if obs.s != 1 or obs.m > 2:
        raise ShapeError(f"Fourier inversion supports s = 1 and m <= 2, got s={obs.s}, m={obs.m}")


def observable_cf_matrix(obs: GaussianObservable, w: Sequence[float], cutoff: int) -> FockOperator:
    """phi_M(w) = exp(i l^t w) W(K w) exp(-w^t alpha w / 2)."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (obs.m,):
        raise ShapeError(f"w has length {w.size}, expected m = {obs.m}")
    W = weyl_matrix(obs.K @ w, cutoff)
    factor = np.exp(1j * obs.l @ w - 0.5 * w @ obs.alpha @ w)
    return FockOperator(modes=W.modes, cutoff=cutoff, matrix=factor * W.matrix, warnings=W.warnings)


def quadrature_window(obs: GaussianObservable, cutoff: int, config: OracleConfig = DEFAULT_CONFIG.oracle) -> float:
    """
    Half-width L of the integration box [-L, L]^m.

    For nondegenerate alpha the Gaussian factor drops below ``gaussian_tail`` at the
    edge. Otherwise the window is the band limit of the truncated quadratures seen
    through K, which grows like sqrt(cutoff).
    """
    eigenvalues = scipy.linalg.eigvalsh(obs.alpha)
    rank, _ = numerical_rank(eigenvalues, DEFAULT_CONFIG.tolerances.rank)
    if rank == obs.m:
        return math.sqrt(2 * math.log(1 / config.gaussian_tail) / float(eigenvalues.min()))
    spectral_radius = float(np.abs(_position_spectrum(cutoff)[0]).max())
    return spectral_radius / float(scipy.linalg.svdvals(obs.K).min())


def _quadrature_rule(m: int, half_width: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, weights = np.polynomial.legendre.leggauss(nodes)
    x, weights = half_width * x, half_width * weights
    if m == 1:
        return x.reshape(-1, 1), weights
    first, second = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([first.reshape(-1), second.reshape(-1)]), np.outer(weights, weights).reshape(-1)


def density_matrix_at(
    obs: GaussianObservable,
    z: Optional[Sequence[float]] = None,
    cutoff: Optional[int] = None,
    nodes: Optional[int] = None,
    probe: bool = False,
    config: OracleConfig = DEFAULT_CONFIG.oracle,
) -> FockOperator:
    """
    POVM density m(z) = (2 pi)^-m int exp(-i z^t w) phi_M(w) d^m w by Gauss-Legendre quadrature.

    Args:
        obs: Single-mode observable with m <= 2.
        z: Outcome point, the origin when omitted.
        cutoff: Photon-number cutoff.
        nodes: Quadrature nodes per dimension.
        probe: Allow singular alpha. The integral then diverges with the window and the
            result only serves as a divergence signature.

    Raises:
        TypeMismatchError: alpha is singular and ``probe`` is not set.
    """
    _require_single_mode(obs)
    cutoff = config.cutoff if cutoff is None else cutoff
    _check_cutoff(cutoff)
    z = np.zeros(obs.m) if z is None else np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (obs.m,):
        raise ShapeError(f"Outcome point has length {z.size}, expected m = {obs.m}")
    rank, _ = numerical_rank(scipy.linalg.eigvalsh(obs.alpha), DEFAULT_CONFIG.tolerances.rank)
    singular = rank < obs.m
    if singular and not probe:
        raise TypeMismatchError("Fourier inversion of a singular alpha needs probe=True")
    if nodes is None:
        nodes = config.nodes_1d if obs.m == 1 else config.nodes_2d

    half_width = quadrature_window(obs, cutoff, config)
    with quadrature_seconds.time():
        points, weights = _quadrature_rule(obs.m, half_width, nodes)
        gaussian = np.exp(-0.5 * np.einsum("ij,jk,ik->i", points, obs.alpha, points))
        coefficients = weights * gaussian * np.exp(-1j * points @ (z - obs.l)) / (2 * math.pi) ** obs.m
        matrix = _weyl_sum(points @ obs.K.T, coefficients, cutoff)

    warnings: Tuple[str, ...] = ()
    if singular:
        warnings = (f"divergence probe: window half-width {half_width:.4g} set by the cutoff band limit",)
    logger.debug(
        "Fourier inversion done",
        extra={"cutoff": cutoff, "nodes": nodes, "half_width": half_width, "probe": singular},
    )
    return FockOperator(modes=1, cutoff=cutoff, matrix=matrix, warnings=warnings)


def largest_eigenvalue(operator: FockOperator) -> float:
    hermitian = 0.5 * (operator.matrix + operator.matrix.conj().T)
    return float(scipy.linalg.eigvalsh(hermitian).max())


@dataclass(frozen=True)
class OracleEstimate:
    """A value computed at two cutoffs, accepted when the relative change is below rtol."""

    value: float
    reference: float
    cutoffs: Tuple[int, int]
    relative_change: float
    converged: bool


def density_norm_estimate(
    obs: GaussianObservable, cutoff: Optional[int] = None, config: OracleConfig = DEFAULT_CONFIG.oracle
) -> OracleEstimate:
    """Largest eigenvalue of m(0) at cutoffs (N, 2N), N defaulting to half the configured cutoff."""
    low = config.cutoff // 2 if cutoff is None else cutoff
    high = 2 * low
    if high > config.max_cutoff:
        raise ShapeError(f"Cutoff {high} exceeds the maximum {config.max_cutoff}")
    coarse = largest_eigenvalue(density_matrix_at(obs, cutoff=low, config=config))
    fine = largest_eigenvalue(density_matrix_at(obs, cutoff=high, config=config))
    relative_change = abs(fine - coarse) / abs(fine)
    converged = relative_change < config.convergence_rtol
    if not converged:
        logger.warning(
            "Oracle density norm did not converge",
            extra={"cutoffs": [low, high], "relative_change": relative_change},
        )
    return OracleEstimate(
        value=fine,
        reference=coarse,
        cutoffs=(low, high),
        relative_change=relative_change,
        converged=converged,
    )


@dataclass(frozen=True)
class DivergenceProbe:
    cutoffs: Tuple[int, ...]
    values: Tuple[float, ...]

    @property
    def growth(self) -> float:
        """Ratio of the last to the first value."""
        return self.values[-1] / self.values[0]

    @property
    def saturating(self) -> bool:
        return any(later <= earlier for earlier, later in zip(self.values, self.values[1:]))


def divergence_probe(obs: GaussianObservable, cutoffs: Sequence[int] = (10, 20, 40)) -> DivergenceProbe:
    """Largest eigenvalue of the windowed m(0) for a singular alpha at increasing cutoffs."""
    values = tuple(largest_eigenvalue(density_matrix_at(obs, cutoff=n, probe=True)) for n in cutoffs)
    logger.info("Divergence probe", extra={"cutoffs": list(cutoffs), "values": list(values)})
    return DivergenceProbe(cutoffs=tuple(cutoffs), values=values)


def covariance_property_residual(
    obs: GaussianObservable, z: Sequence[float], cutoff: Optional[int] = None
) -> float:
    """Max deviation of m(z) from W(K1 z) m(0) W(K1 z)^* on photon numbers up to cutoff / 3."""
    cutoff = DEFAULT_CONFIG.oracle.cutoff if cutoff is None else cutoff
    shifted = density_matrix_at(obs, z=z, cutoff=cutoff)
    core = density_matrix_at(obs, cutoff=cutoff)
    W = weyl_matrix(covariant_core_shift(obs, z), cutoff).matrix
    difference = FockOperator(modes=1, cutoff=cutoff, matrix=shifted.matrix - W @ core.matrix @ W.conj().T)
    return max_abs(difference.low_block(cutoff // 3))


def positive_definiteness_gap(
    obs: GaussianObservable, ws: Sequence[Sequence[float]], vectors: np.ndarray, cutoff: int
) -> float:
    """
    Smallest eigenvalue of the block matrix [<psi_a| phi_M(w_j - w_k) |psi_b>].

    Args:
        vectors: Fock-space vectors psi_a stored column-wise.
    """
    ws = [np.asarray(w, dtype=float) for w in ws]
    vectors = np.asarray(vectors, dtype=complex)
    n = vectors.shape[1]
    gram = np.zeros((len(ws) * n, len(ws) * n), dtype=complex)
    for j, w_j in enumerate(ws):
        for k, w_k in enumerate(ws):
            phi = observable_cf_matrix(obs, w_j - w_k, cutoff).matrix
            gram[j * n : (j + 1) * n, k * n : (k + 1) * n] = vectors.conj().T @ phi @ vectors
    return float(scipy.linalg.eigvalsh(0.5 * (gram + gram.conj().T)).min())


def gaussian_state_matrix(
    state: GaussianState, cutoff: Optional[int] = None, config: OracleConfig = DEFAULT_CONFIG.oracle
) -> FockOperator:
    """
    Density matrix of a single-mode Gaussian state.

    The state is a displaced, symplectically transformed thermal state built at
    cutoff + padding and then cropped. With nu = sqrt(det gamma) and S = (gamma / nu)^(1/2),
    the unitary exp(-i R^t G R / 2) with G = Delta log S maps R to S R.
    """
    if state.s != 1:
        raise ShapeError(f"Fock states are built for one mode, got s={state.s}")
    cutoff = config.cutoff if cutoff is None else cutoff
    _check_cutoff(cutoff)
    padded = cutoff + config.padding

    nu = math.sqrt(max(float(np.linalg.det(state.gamma)), 0.25))
    occupation = max(nu - 0.5, 0.0)
    ratio = occupation / (occupation + 1.0)
    rho = np.diag((1.0 - ratio) * ratio ** np.arange(padded + 1)).astype(complex)

    eigenvalues, Q = scipy.linalg.eigh(state.gamma / nu)
    log_S = (Q * (0.5 * np.log(eigenvalues))) @ Q.T
    G = block_form(1) @ log_S
    q, p = (op.matrix for op in quadratures(1, padded))
    generator = 0.5 * (G[0, 0] * q @ q + G[0, 1] * q @ p + G[1, 0] * p @ q + G[1, 1] * p @ p)
    energies, U_basis = scipy.linalg.eigh(0.5 * (generator + generator.conj().T))
    U = (U_basis * np.exp(-1j * energies)) @ U_basis.conj().T
    D = _weyl_sum(-block_form(1) @ state.mean, [1.0], padded)

    full = D @ U @ rho @ U.conj().T @ D.conj().T
    matrix = full[: cutoff + 1, : cutoff + 1]
    deficit = 1.0 - float(np.trace(matrix).real)
    warnings: Tuple[str, ...] = ()
    if abs(deficit) > 1e-8:
        message = f"state trace deficit {deficit:.3g} at cutoff {cutoff}"
        logger.warning(message, extra={"cutoff": cutoff, "label": state.label})
        warnings = (message,)
    return FockOperator(modes=1, cutoff=cutoff, matrix=matrix, warnings=warnings)


def state_trace_cf(state: GaussianState, obs: GaussianObservable, w: Sequence[float], cutoff: Optional[int] = None) -> complex:
    """Tr[rho phi_M(w)], the outcome characteristic function seen by the oracle."""
    cutoff = DEFAULT_CONFIG.oracle.cutoff if cutoff is None else cutoff
    rho = gaussian_state_matrix(state, cutoff)
    return complex(np.trace(rho.matrix @ observable_cf_matrix(obs, w, cutoff).matrix))


def ancilla_trace_factor(
    ext: NaimarkExtension, obs: GaussianObservable, w: Sequence[float], cutoff: Optional[int] = None
) -> complex:
    """Tr[rho_C W_C(Lambda P K w)] for a single-mode ancilla."""
    if ext.s_C != 1:
        raise ShapeError(f"Ancilla trace is evaluated for one ancilla mode, got s_C={ext.s_C}")
    cutoff = DEFAULT_CONFIG.oracle.cutoff if cutoff is None else cutoff
    ancilla = GaussianState(s=1, mean=np.zeros(2), gamma=ext.alpha_C, label="ancilla")
    rho = gaussian_state_matrix(ancilla, cutoff)
    v = ext.measured_map(obs.K) @ np.asarray(w, dtype=float)
    return complex(np.trace(rho.matrix @ weyl_matrix(v, cutoff).matrix))
