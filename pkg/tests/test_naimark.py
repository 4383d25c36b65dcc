import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gaussian_observables.errors import ShapeError
from gaussian_observables.naimark import (
    characteristic_check,
    extend,
    hybrid_ancilla_dims,
    verify,
)
from gaussian_observables.observable import (
    GaussianObservable,
    heterodyne_thermal,
    heterodyne_vacuum,
    noisy_homodyne,
    sharp_homodyne,
)

from conftest import random_instances, random_symplectic


def test_heterodyne_extension():
    obs = heterodyne_vacuum(1)
    ext = extend(obs)
    assert ext.s_C == 1
    assert_allclose(ext.alpha_C, 0.5 * np.eye(2), atol=1e-12)
    assert_allclose(ext.Lambda, np.diag([1.0, -1.0]))
    assert_allclose(ext.P, np.eye(2), atol=1e-12)
    residuals = verify(ext, obs)
    assert residuals.max_residual < 1e-12
    assert residuals.ok()


def test_sharp_homodyne_needs_no_ancilla():
    obs = sharp_homodyne(1)
    ext = extend(obs)
    assert ext.s_C == 0
    assert ext.P.shape == (0, 2)
    residuals = verify(ext, obs)
    assert residuals.max_residual == 0.0
    assert residuals.state_validity_min_eig == 0.0


def test_noisy_homodyne_extension():
    obs = noisy_homodyne(1, 0.5)
    ext = extend(obs)
    assert ext.s_C == 1
    LPK = ext.measured_map(obs.K)
    assert_allclose(LPK.T @ ext.alpha_C @ LPK, [[0.5]], atol=1e-12)
    assert verify(ext, obs).ok()


def test_thermal_heterodyne_extension():
    obs = heterodyne_thermal(2, [0.0, 1.5])
    ext = extend(obs)
    assert ext.s_C == 2
    assert sorted(np.diag(ext.alpha_C)) == pytest.approx([0.5, 0.5, 2.0, 2.0])
    assert verify(ext, obs).ok()


def test_wrong_involution_is_detected():
    obs = heterodyne_vacuum(1)
    ext = dataclasses.replace(extend(obs), Lambda=np.diag([-1.0, -1.0]))
    residuals = verify(ext, obs)
    assert residuals.com_residual > 0.1
    assert residuals.com_residual == pytest.approx(2.0)
    assert not residuals.ok()


def test_verify_rejects_mismatched_observable():
    ext = extend(heterodyne_vacuum(1))
    with pytest.raises(ShapeError):
        verify(ext, heterodyne_vacuum(2))


def test_extension_on_random_suite(instances):
    rng = np.random.default_rng(99)
    for obs in instances:
        ext = extend(obs)
        decomposition = ext.decomposition
        assert ext.s_C == decomposition.r_alpha - decomposition.r_delta // 2
        assert ext.Zc_basis.dim + ext.Z3.dim + ext.Z4.dim == 2 * obs.s
        residuals = verify(ext, obs)
        assert residuals.max_residual < 1e-9, obs
        assert residuals.state_validity_min_eig >= -1e-10
        for w in rng.normal(size=(25, obs.m)):
            assert characteristic_check(ext, obs, w).residual < 1e-10


def test_characteristic_check_rejects_wrong_length():
    obs = heterodyne_vacuum(1)
    with pytest.raises(ShapeError):
        characteristic_check(extend(obs), obs, [1.0])


@pytest.mark.parametrize(
    "obs, expected",
    [
        (heterodyne_vacuum(1), (1, 1, 0)),
        (noisy_homodyne(1, 0.5), (0, 1, 1)),
        (sharp_homodyne(1), (0, 0, 0)),
    ],
)
def test_hybrid_ancilla_dims(obs, expected):
    dims = hybrid_ancilla_dims(obs)
    assert (dims.quantum_modes, dims.classical_remark, dims.classical_block) == expected
    assert dims.consistent == (dims.quantum_modes == 0)


@pytest.mark.parametrize("seed", range(5))
def test_rotated_homodyne_extensions(seed):
    K = random_symplectic(np.random.default_rng(seed), 2)[:, [0, 2]]
    noisy = GaussianObservable(s=2, K=K, alpha=0.5 * np.eye(2))
    ext = extend(noisy)
    assert ext.s_C == 2
    assert ext.hybrid_quantum_modes == 0
    assert verify(ext, noisy).ok()

    sharp = GaussianObservable(s=2, K=K, alpha=np.zeros((2, 2)))
    ext = extend(sharp)
    assert ext.s_C == 0
    assert ext.Z3.dim == 4
    assert verify(ext, sharp).ok()
    dims = hybrid_ancilla_dims(sharp)
    assert (dims.quantum_modes, dims.classical_remark, dims.classical_block) == (0, 0, 0)


def test_extension_respects_psd_tolerance():
    obs = GaussianObservable(s=1, K=np.eye(2), alpha=0.25 * np.eye(2))
    ext = extend(obs, psd_tol=0.3)
    assert ext.s_C == 1
    assert_allclose(ext.alpha_C, 0.25 * np.eye(2), atol=1e-12)
    assert hybrid_ancilla_dims(obs, psd_tol=0.3).quantum_modes == 1
