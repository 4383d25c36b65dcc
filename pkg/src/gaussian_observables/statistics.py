#!/usr/bin/env python
# -*- coding: utf-8 -*-
# ---------------------------------------------------------------------------
"""Gaussian states and the outcome law of a Gaussian observable on them."""
# ---------------------------------------------------------------------------
from __future__ import annotations
from dataclasses import dataclass
import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from prometheus_client import Counter

from gaussian_observables.configuration import DEFAULT_CONFIG
from gaussian_observables.errors import ShapeError, StateError
from gaussian_observables.observable import GaussianObservable, ValidityReport, require_valid
from gaussian_observables.symplectic import block_form, max_abs

logger = logging.getLogger(__name__)

samples_count = Counter("outcome_samples_total", "Number of outcome vectors sampled")


def validate_state(gamma, tol: float = DEFAULT_CONFIG.tolerances.psd) -> ValidityReport:
    """Uncertainty relation gamma + (i/2) Delta >= -tol for a 2s x 2s covariance."""
    gamma = np.asarray(gamma, dtype=float)
    s = gamma.shape[0] // 2
    min_eigenvalue = float(scipy.linalg.eigvalsh(gamma + 0.5j * block_form(s)).min())
    valid = min_eigenvalue >= -tol
    message = (
        f"gamma + (i/2) Delta has min eigenvalue {min_eigenvalue:.6g}"
        if valid
        else f"invalid state: gamma + (i/2) Delta has min eigenvalue {min_eigenvalue:.6g} < -{tol:g}"
    )
    return ValidityReport(valid=valid, min_eigenvalue=min_eigenvalue, message=message)


@dataclass(frozen=True, eq=False)
class GaussianState:
    """
    :param s: Number of modes.
    :param mean: Quadrature means, interleaved (q1, p1, ...).
    :param gamma: Symmetrised covariance matrix.

    Raises StateError when gamma violates the uncertainty relation.
    """

    s: int
    mean: np.ndarray
    gamma: np.ndarray
    label: str = ""

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        gamma = np.array(self.gamma, dtype=float, ndmin=2)
        if mean.shape != (2 * self.s,):
            raise ShapeError(f"State mean has length {mean.size}, expected 2s = {2 * self.s}")
        if gamma.shape != (2 * self.s, 2 * self.s):
            raise ShapeError(f"State covariance has shape {gamma.shape}, expected {(2 * self.s,) * 2}")
        if max_abs(gamma - gamma.T) > DEFAULT_CONFIG.tolerances.symmetry:
            raise StateError("State covariance is not symmetric")
        gamma = 0.5 * (gamma + gamma.T)
        report = validate_state(gamma)
        if not report.valid:
            raise StateError(report.message)
        mean.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "gamma", gamma)


def vacuum_state(s: int) -> GaussianState:
    return GaussianState(s=s, mean=np.zeros(2 * s), gamma=0.5 * np.eye(2 * s), label="vacuum")


def thermal_state(s: int, occupations: Sequence[float]) -> GaussianState:
    occupations = np.asarray(occupations, dtype=float).reshape(-1)
    if occupations.shape != (s,) or np.any(occupations < 0):
        raise StateError(f"Expected {s} nonnegative occupation numbers, got {occupations.tolist()}")
    return GaussianState(
        s=s, mean=np.zeros(2 * s), gamma=np.diag(np.repeat(occupations + 0.5, 2)), label="thermal"
    )


def coherent_state(mean: Sequence[float]) -> GaussianState:
    mean = np.asarray(mean, dtype=float).reshape(-1)
    if mean.size % 2:
        raise ShapeError(f"Coherent state mean must have even length, got {mean.size}")
    s = mean.size // 2
    return GaussianState(s=s, mean=mean, gamma=0.5 * np.eye(2 * s), label="coherent")


def squeezed_vacuum(r: Union[float, Sequence[float]]) -> GaussianState:
    """Vacuum squeezed in q by exp(-r_j) per mode."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    diagonal = np.column_stack([np.exp(-2 * r), np.exp(2 * r)]).reshape(-1)
    return GaussianState(s=r.size, mean=np.zeros(2 * r.size), gamma=0.5 * np.diag(diagonal), label="squeezed")


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Normal law N(mean, covariance) on R^m."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        covariance = np.array(self.covariance, dtype=float, ndmin=2)
        if covariance.shape != (mean.size, mean.size):
            raise ShapeError(f"Covariance shape {covariance.shape} does not match mean length {mean.size}")
        if max_abs(covariance - covariance.T) > DEFAULT_CONFIG.tolerances.symmetry * max(1.0, max_abs(covariance)):
            raise StateError("Outcome covariance is not symmetric")
        covariance = 0.5 * (covariance + covariance.T)
        min_eigenvalue = float(scipy.linalg.eigvalsh(covariance).min())
        if min_eigenvalue < -DEFAULT_CONFIG.tolerances.psd * max(1.0, max_abs(covariance)):
            raise StateError(f"Outcome covariance is not positive semidefinite: min eigenvalue {min_eigenvalue:.6g}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @property
    def m(self) -> int:
        return self.mean.size

    def characteristic_value(self, w: Sequence[float]) -> complex:
        w = np.asarray(w, dtype=float).reshape(-1)
        return complex(np.exp(1j * self.mean @ w - 0.5 * w @ self.covariance @ w))


def outcome_distribution(
    obs: GaussianObservable, state: GaussianState, psd_tol: float = DEFAULT_CONFIG.tolerances.psd
) -> OutcomeDistribution:
    """
    Law of the outcomes of ``obs`` measured on ``state``.

    The outcome characteristic function is Tr rho phi_M(w), which for a Gaussian state
    gives mean K^t mu + l and covariance K^t gamma K + alpha.
    """
    if obs.s != state.s:
        raise ShapeError(f"Observable acts on {obs.s} modes, state has {state.s}")
    require_valid(obs, psd_tol)
    mean = obs.K.T @ state.mean + obs.l
    covariance = obs.K.T @ state.gamma @ obs.K + obs.alpha
    return OutcomeDistribution(mean=mean, covariance=covariance)


def sample(dist: OutcomeDistribution, n: int, seed: Optional[int] = None) -> np.ndarray:
    """
    Draw n outcome vectors.

    The covariance is factorised through its eigendecomposition, so rank-deficient
    laws are sampled on their support.

    Returns:
        Array of shape (n, m).
    """
    if n < 0:
        raise ShapeError(f"Sample count must be nonnegative, got {n}")
    seed = DEFAULT_CONFIG.sampling.seed if seed is None else seed
    eigenvalues, V = scipy.linalg.eigh(dist.covariance)
    clipped = int(np.count_nonzero(eigenvalues < 0))
    if clipped:
        logger.debug("Clipped negative covariance eigenvalues", extra={"count": clipped})
    factor = V * np.sqrt(np.clip(eigenvalues, 0.0, None))
    rng = np.random.default_rng(seed)
    samples = dist.mean + rng.standard_normal((n, dist.m)) @ factor.T
    samples_count.inc(n)
    return samples


def empirical_moments(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    samples = np.asarray(samples, dtype=float)
    return samples.mean(axis=0), np.atleast_2d(np.cov(samples, rowvar=False))


def state_characteristic_value(state: GaussianState, z: Sequence[float]) -> complex:
    """Tr rho W(z) = exp(i mean^t z - z^t gamma z / 2)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (2 * state.s,):
        raise ShapeError(f"z has length {z.size}, expected 2s = {2 * state.s}")
    return complex(np.exp(1j * state.mean @ z - 0.5 * z @ state.gamma @ z))
