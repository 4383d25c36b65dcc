#!/usr/bin/env python
# -*- coding: utf-8 -*-
# ---------------------------------------------------------------------------
"""Minimal Naimark extension of a Gaussian observable.

The POVM is realised as a joint spectral measure of commuting quadrature
combinations on the system plus an ancilla of s_C = r_alpha - r_Delta_K / 2 modes
prepared in a centered Gaussian state. The ancilla phase space Z_C is embedded in
the system phase space Z_A; Lambda is the involution of Z_C flipping the partner
vectors and P projects Z_A onto the measured directions in Z_C coordinates.
"""
# ---------------------------------------------------------------------------
from __future__ import annotations
from dataclasses import dataclass
import logging
from typing import Sequence

import numpy as np
import scipy.linalg
from prometheus_client import Counter

from gaussian_observables.errors import DecompositionError, InfeasibleComplementError, ShapeError
from gaussian_observables.configuration import DEFAULT_CONFIG
from gaussian_observables.observable import GaussianObservable, canonical_decomposition
from gaussian_observables.symplectic import (
    CanonicalDecomposition,
    SubspaceBasis,
    block_form,
    isotropic_partner,
    max_abs,
    symplectic_complement,
)

logger = logging.getLogger(__name__)

extensions_count = Counter(
    "naimark_extensions_total",
    "Number of Naimark extensions built",
    labelnames=("outcome",),
)


def _interleave(E: np.ndarray, H: np.ndarray) -> np.ndarray:
    out = np.zeros((E.shape[0], 2 * E.shape[1]))
    out[:, 0::2] = E
    out[:, 1::2] = H
    return out


@dataclass(frozen=True, eq=False)
class NaimarkExtension:
    """
    :param s_C: Number of ancilla modes.
    :param Zc_basis: Basis e_1, h_1, ..., e_sC, h_sC of Z_C inside Z_A.
    :param Delta_C: Pairing matrix of that basis (the standard form).
    :param alpha_C: Covariance of the ancilla state, 2 s_C x 2 s_C.
    :param Lambda: Involution e -> e, h -> -h.
    :param P: 2 s_C x 2 s projection onto the measured directions.
    :param partners: Partners of the type-2 directions, the kernel part of P inside Z_C.
    :param Z3: Symplectic basis spanned by the type-3 directions and their partners.
    :param Z4: Basis of the symplectic complement of Z_C + Z3.
    """

    s_C: int
    Zc_basis: SubspaceBasis
    Delta_C: np.ndarray
    alpha_C: np.ndarray
    Lambda: np.ndarray
    P: np.ndarray
    partners: SubspaceBasis
    Z3: SubspaceBasis
    Z4: SubspaceBasis
    decomposition: CanonicalDecomposition
    hybrid_quantum_modes: int
    hybrid_classical_dims: int

    def measured_map(self, K: np.ndarray) -> np.ndarray:
        """Lambda P K: how outcome directions enter the ancilla quadratures."""
        return self.Lambda @ self.P @ K


def extend(
    obs: GaussianObservable,
    tol: float = DEFAULT_CONFIG.tolerances.rank,
    psd_tol: float = DEFAULT_CONFIG.tolerances.psd,
) -> NaimarkExtension:
    """
    Build the minimal Naimark extension.

    Block-1 columns of K T already form canonical pairs. The type-2 and type-3 columns
    span an isotropic subspace symplectically orthogonal to them and receive partners
    from ``isotropic_partner``; only the type-2 pairs join the ancilla.
    """
    decomposition = canonical_decomposition(obs, tol, psd_tol)
    s1, s2, s3 = decomposition.s1, decomposition.s2, decomposition.s3
    symplectic_block, type2_block, type3_block = decomposition.blocks
    delta = obs.delta
    dim = delta.dim
    s_C = s1 + s2

    KT = obs.K @ decomposition.T
    Z1 = SubspaceBasis(dim, KT[:, symplectic_block])
    isotropic = SubspaceBasis(dim, np.hstack([KT[:, type2_block], KT[:, type3_block]]))
    try:
        partner = isotropic_partner(isotropic, avoid=Z1, delta=delta, orthogonal_to=Z1)
    except InfeasibleComplementError:
        extensions_count.labels(outcome="infeasible").inc()
        raise DecompositionError("Partner construction failed for a valid observable")

    E2, H2 = isotropic.vectors[:, :s2], partner.vectors[:, :s2]
    E3, H3 = isotropic.vectors[:, s2:], partner.vectors[:, s2:]
    Zc = SubspaceBasis(dim, np.hstack([Z1.vectors, _interleave(E2, H2)]))
    Z3 = SubspaceBasis(dim, _interleave(E3, H3))
    Z4 = symplectic_complement(Zc.join(Z3), delta)

    frame = np.hstack([Zc.vectors, Z3.vectors, Z4.vectors])
    if frame.shape[1] != dim:
        raise DecompositionError(f"Subspace frame has {frame.shape[1]} columns, expected {dim}")
    selector = np.zeros((2 * s_C, dim))
    for j in range(2 * s_C):
        if j < 2 * s1 or j % 2 == 0:
            selector[j, j] = 1.0
    P = selector @ scipy.linalg.inv(frame)

    Lambda = np.diag([1.0 if j % 2 == 0 else -1.0 for j in range(2 * s_C)])
    alpha_C = np.diag(np.concatenate([np.repeat(decomposition.a, 2), np.full(2 * s2, 0.5)]))
    Delta_C = Zc.vectors.T @ delta.matrix @ Zc.vectors

    extensions_count.labels(outcome="ok").inc()
    logger.info(
        "Built Naimark extension",
        extra={"label": obs.label, "s_C": s_C, "s1": s1, "s2": s2, "s3": s3},
    )
    return NaimarkExtension(
        s_C=s_C,
        Zc_basis=Zc,
        Delta_C=Delta_C,
        alpha_C=alpha_C,
        Lambda=Lambda,
        P=P,
        partners=SubspaceBasis(dim, H2),
        Z3=Z3,
        Z4=Z4,
        decomposition=decomposition,
        hybrid_quantum_modes=s1,
        hybrid_classical_dims=s2,
    )


@dataclass(frozen=True)
class Residuals:
    proj_residual: float
    com_residual: float
    involution_residual: float
    state_validity_min_eig: float
    commuting_X_residual: float
    projection_residual: float
    symplectic_basis_residual: float

    @property
    def max_residual(self) -> float:
        return max(
            self.proj_residual,
            self.com_residual,
            self.involution_residual,
            self.commuting_X_residual,
            self.projection_residual,
            self.symplectic_basis_residual,
        )

    def ok(self, tol: float = 1e-9) -> bool:
        return self.max_residual < tol and self.state_validity_min_eig >= -tol


def verify(ext: NaimarkExtension, obs: GaussianObservable) -> Residuals:
    """Max-norm residuals of the defining identities of the extension."""
    if ext.P.shape[1] != obs.K.shape[0]:
        raise ShapeError(f"Extension acts on R^{ext.P.shape[1]}, observable on R^{obs.K.shape[0]}")
    LPK = ext.measured_map(obs.K)
    proj_residual = max_abs(LPK.T @ ext.alpha_C @ LPK - obs.alpha)
    com_residual = max_abs(LPK.T @ ext.Delta_C @ LPK + obs.delta_K)

    identity = np.eye(2 * ext.s_C)
    involution_residual = max(
        max_abs(ext.Lambda @ ext.Lambda - identity),
        max_abs(ext.Lambda @ ext.Delta_C @ ext.Lambda + ext.Delta_C),
    )
    state_validity_min_eig = (
        float(scipy.linalg.eigvalsh(ext.alpha_C + 0.5j * ext.Delta_C).min()) if ext.s_C else 0.0
    )

    # components of X = R_A K + R_C Lambda P K on the joint phase space
    joint_form = scipy.linalg.block_diag(obs.delta.matrix, block_form(ext.s_C))
    X = np.vstack([obs.K, LPK])
    commuting_X_residual = max_abs(X.T @ joint_form @ X)

    s1 = ext.hybrid_quantum_modes
    selected = np.diag([1.0 if j < 2 * s1 or j % 2 == 0 else 0.0 for j in range(2 * ext.s_C)])
    kernel = np.hstack([ext.partners.vectors, ext.Z3.vectors, ext.Z4.vectors])
    projection_residual = max(
        max_abs(ext.P @ ext.Zc_basis.vectors - selected),
        max_abs(ext.P @ kernel),
    )
    symplectic_basis_residual = max_abs(ext.Delta_C - block_form(ext.s_C))

    residuals = Residuals(
        proj_residual=proj_residual,
        com_residual=com_residual,
        involution_residual=involution_residual,
        state_validity_min_eig=state_validity_min_eig,
        commuting_X_residual=commuting_X_residual,
        projection_residual=projection_residual,
        symplectic_basis_residual=symplectic_basis_residual,
    )
    logger.debug("Naimark residuals", extra={"label": obs.label, "max_residual": residuals.max_residual})
    return residuals


@dataclass(frozen=True)
class CharacteristicPair:
    lhs: complex
    rhs: complex

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def characteristic_check(ext: NaimarkExtension, obs: GaussianObservable, w: Sequence[float]) -> CharacteristicPair:
    """
    Ancilla trace factor of the joint Weyl operator against the noise factor of the POVM.

    lhs = exp(-w^t K^t P^t Lambda alpha_C Lambda P K w / 2), rhs = exp(-w^t alpha w / 2).
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (obs.m,):
        raise ShapeError(f"w has length {w.size}, expected m = {obs.m}")
    v = ext.measured_map(obs.K) @ w
    lhs = complex(np.exp(-0.5 * v @ ext.alpha_C @ v))
    rhs = complex(np.exp(-0.5 * w @ obs.alpha @ w))
    return CharacteristicPair(lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class HybridDims:
    """
    Ancilla size when classical ancilla dimensions are allowed.

    ``classical_remark`` is r_alpha - r_Delta_K / 2, ``classical_block`` is the type-2
    block size r_alpha - r_Delta_K. The two agree only when s1 = 0.
    """

    quantum_modes: int
    classical_remark: int
    classical_block: int

    @property
    def consistent(self) -> bool:
        return self.classical_remark == self.classical_block


def hybrid_ancilla_dims(
    obs: GaussianObservable,
    tol: float = DEFAULT_CONFIG.tolerances.rank,
    psd_tol: float = DEFAULT_CONFIG.tolerances.psd,
) -> HybridDims:
    decomposition = canonical_decomposition(obs, tol, psd_tol)
    dims = HybridDims(
        quantum_modes=decomposition.s1,
        classical_remark=decomposition.r_alpha - decomposition.r_delta // 2,
        classical_block=decomposition.r_alpha - decomposition.r_delta,
    )
    if not dims.consistent:
        logger.info(
            "Classical ancilla counts differ",
            extra={"classical_remark": dims.classical_remark, "classical_block": dims.classical_block},
        )
    return dims
