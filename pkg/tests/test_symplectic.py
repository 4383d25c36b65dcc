import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import expm

from gaussian_observables.errors import (
    InfeasibleComplementError,
    ShapeError,
    SymmetryError,
    ValidityError,
)
from gaussian_observables.symplectic import (
    SubspaceBasis,
    block_form,
    extended_williamson,
    is_isotropic,
    isotropic_partner,
    numerical_rank,
    pairing_matrix,
    same_span,
    skew_canonical,
    standard_form,
    symplectic_complement,
    williamson,
)

from conftest import random_instances, random_symplectic

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_standard_form_single_mode():
    delta = standard_form(1)
    assert_allclose(delta.matrix, [[0, -1], [1, 0]])
    assert_allclose(delta.inverse, -delta.matrix)


def test_standard_form_two_modes():
    delta = standard_form(2).matrix
    expected = np.zeros((4, 4))
    expected[0, 1], expected[1, 0] = -1, 1
    expected[2, 3], expected[3, 2] = -1, 1
    assert_allclose(delta, expected)
    assert_allclose(delta @ delta.T, np.eye(4))
    assert_allclose(delta @ delta, -np.eye(4))


def test_standard_form_rejects_empty_system():
    with pytest.raises(ShapeError):
        standard_form(0)


def test_numerical_rank_flags_values_near_threshold():
    assert numerical_rank([1.0, 0.5, 0.0]) == (2, False)
    rank, ambiguous = numerical_rank([1.0, 3e-10])
    assert rank == 2
    assert ambiguous
    assert numerical_rank([0.0, 0.0]) == (0, False)


def test_skew_canonical_of_standard_form_is_identity():
    S, r = skew_canonical(block_form(1))
    assert r == 2
    assert_allclose(S, np.eye(2), atol=1e-12)


def test_skew_canonical_of_zero_matrix():
    S, r = skew_canonical(np.zeros((3, 3)))
    assert r == 0
    assert_allclose(S, np.eye(3))


def test_skew_canonical_rejects_symmetric_input():
    with pytest.raises(SymmetryError):
        skew_canonical(np.eye(2))


@settings(max_examples=60, deadline=None)
@given(seed=seeds, m=st.integers(min_value=1, max_value=7))
def test_skew_canonical_random(seed, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, m))
    D = A - A.T
    form = skew_canonical(D)
    S = np.asarray(form.S)
    assert form.rank == 2 * (m // 2)
    expected = np.zeros((m, m))
    expected[: form.rank, : form.rank] = block_form(form.rank // 2)
    assert_allclose(S.T @ D @ S, expected, atol=1e-9)
    assert abs(np.linalg.det(S)) > 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=seeds, m=st.integers(min_value=2, max_value=7), k=st.integers(min_value=0, max_value=3))
def test_skew_canonical_rank_deficient(seed, m, k):
    k = min(k, m // 2)
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(m, 2 * k))
    D = B @ block_form(k) @ B.T if k else np.zeros((m, m))
    form = skew_canonical(D)
    assert form.rank == 2 * k
    S = np.asarray(form.S)
    kernel = S[:, 2 * k :]
    assert_allclose(D @ kernel, 0, atol=1e-9 * max(1.0, np.abs(D).max()))


def test_williamson_diagonal_input():
    A = np.diag([2.0, 2.0, 1.0, 1.0])
    M, a = williamson(A)
    assert_allclose(a, [2.0, 1.0])
    assert_allclose(M.T @ A @ M, np.diag([2.0, 2.0, 1.0, 1.0]), atol=1e-12)
    assert_allclose(M.T @ block_form(2) @ M, block_form(2), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(min_value=1, max_value=4))
def test_williamson_random_positive_matrix(seed, n):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(2 * n, 2 * n))
    A = B @ B.T + 0.5 * np.eye(2 * n)
    M, a = williamson(A)
    assert np.all(np.diff(a) <= 1e-12)
    assert_allclose(M.T @ A @ M, np.diag(np.repeat(a, 2)), atol=1e-8 * max(1.0, a.max()))
    assert_allclose(M.T @ block_form(n) @ M, block_form(n), atol=1e-8)


def test_williamson_rejects_indefinite_matrix():
    with pytest.raises(ValidityError):
        williamson(np.diag([1.0, -1.0]))


def test_extended_williamson_heterodyne():
    decomposition = extended_williamson(0.5 * np.eye(2), block_form(1))
    assert (decomposition.s1, decomposition.s2, decomposition.s3) == (1, 0, 0)
    assert_allclose(decomposition.a, [0.5])
    assert_allclose(decomposition.T, np.eye(2), atol=1e-12)


def test_extended_williamson_noisy_homodyne():
    decomposition = extended_williamson(np.array([[0.5]]), np.zeros((1, 1)))
    assert (decomposition.s1, decomposition.s2, decomposition.s3) == (0, 1, 0)
    assert_allclose(decomposition.T, [[1.0]])


def test_extended_williamson_rejects_invalid_pair():
    with pytest.raises(ValidityError) as error:
        extended_williamson(0.25 * np.eye(2), block_form(1))
    assert error.value.min_eigenvalue == pytest.approx(-0.25)


def test_extended_williamson_rounding_level_delta_is_zero():
    delta_K = 1e-17 * block_form(1)
    sharp = extended_williamson(np.zeros((2, 2)), delta_K)
    assert (sharp.s1, sharp.s2, sharp.s3) == (0, 0, 2)
    noisy = extended_williamson(0.5 * np.eye(2), delta_K)
    assert (noisy.s1, noisy.s2, noisy.s3) == (0, 2, 0)
    assert noisy.a == ()


def test_extended_williamson_flags_ambiguous_rank():
    decomposition = extended_williamson(np.diag([1.0, 1e-10]), np.zeros((2, 2)))
    assert decomposition.ill_conditioned
    assert any("rank of alpha" in message for message in decomposition.warnings)
    assert decomposition.s1 == 0
    assert decomposition.s2 + decomposition.s3 == 2


def test_extended_williamson_random_suite():
    for obs in random_instances():
        decomposition = extended_williamson(obs.alpha, obs.delta_K)
        T = np.asarray(decomposition.T)
        tol = 1e-9 * max(1.0, max(decomposition.a, default=1.0))
        assert_allclose(T.T @ obs.alpha @ T, decomposition.alpha_blockform(), atol=tol)
        assert_allclose(T.T @ obs.delta_K @ T, decomposition.delta_blockform(), atol=tol)
        assert all(a >= 0.5 - 1e-10 for a in decomposition.a)
        assert 2 * decomposition.s1 + decomposition.s2 + decomposition.s3 == obs.m
        assert decomposition.s1 == decomposition.r_delta // 2
        assert decomposition.r_alpha == np.linalg.matrix_rank(obs.alpha, tol=1e-8)


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_extended_williamson_scale_invariance(c):
    for obs in random_instances(50):
        base = extended_williamson(obs.alpha, obs.delta_K)
        scaled = extended_williamson(c * obs.alpha, c * obs.delta_K)
        assert (scaled.s1, scaled.s2, scaled.s3) == (base.s1, base.s2, base.s3)


def test_symplectic_complement_of_position_is_itself():
    delta = standard_form(1)
    L = SubspaceBasis.from_vectors([[1.0, 0.0]])
    assert same_span(symplectic_complement(L, delta), L)


def test_symplectic_complement_edge_cases():
    delta = standard_form(2)
    assert symplectic_complement(SubspaceBasis.empty(4), delta).dim == 4
    assert symplectic_complement(SubspaceBasis(4, np.eye(4)), delta).dim == 0


@settings(max_examples=40, deadline=None)
@given(seed=seeds, k=st.integers(min_value=1, max_value=5))
def test_symplectic_complement_random(seed, k):
    rng = np.random.default_rng(seed)
    delta = standard_form(3)
    L = SubspaceBasis(6, rng.normal(size=(6, k)))
    complement = symplectic_complement(L, delta)
    assert complement.dim == 6 - k
    assert_allclose(pairing_matrix(complement, L, delta), 0, atol=1e-9)


def test_isotropic_partner_single_mode():
    partner = isotropic_partner(
        SubspaceBasis.from_vectors([[1.0, 0.0]]), SubspaceBasis.empty(2), standard_form(1)
    )
    assert_allclose(partner.vectors[:, 0], [0.0, 1.0], atol=1e-12)


def test_isotropic_partner_avoiding_second_mode():
    delta = standard_form(2)
    L = SubspaceBasis.from_vectors([[1.0, 0.0, 0.0, 0.0]])
    avoid = SubspaceBasis.from_vectors([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
    partner = isotropic_partner(L, avoid, delta)
    assert_allclose(partner.vectors[:, 0], [0.0, 1.0, 0.0, 0.0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, k=st.integers(min_value=1, max_value=3))
def test_isotropic_partner_random_lagrangian_part(seed, k):
    rng = np.random.default_rng(seed)
    s = 3
    delta = standard_form(s)
    # random isotropic subspace: image of positions under a random symplectic map
    generator = rng.normal(scale=0.4, size=(2 * s, 2 * s))
    S = expm(block_form(s) @ (generator + generator.T) / 2)
    L = SubspaceBasis(2 * s, S[:, 0 : 2 * k : 2])
    partner = isotropic_partner(L, SubspaceBasis.empty(2 * s), delta)
    assert is_isotropic(partner, delta)
    assert_allclose(pairing_matrix(L, partner, delta), -np.eye(k), atol=1e-9)
    joint = np.hstack([L.vectors, partner.vectors])
    assert np.linalg.matrix_rank(joint) == 2 * k


def test_isotropic_partner_dimension_count():
    delta = standard_form(1)
    L = SubspaceBasis.from_vectors([[1.0, 0.0]])
    avoid = SubspaceBasis.from_vectors([[0.0, 1.0]])
    with pytest.raises(InfeasibleComplementError):
        isotropic_partner(L, avoid, delta)


def test_isotropic_partner_rejects_non_isotropic():
    with pytest.raises(InfeasibleComplementError):
        isotropic_partner(SubspaceBasis(2, np.eye(2)), SubspaceBasis.empty(2), standard_form(1))


def test_subspace_basis_rejects_dependent_vectors():
    with pytest.raises(ShapeError):
        SubspaceBasis.from_vectors([[1.0, 0.0], [2.0, 0.0]])


@settings(max_examples=40, deadline=None)
@given(seed=seeds, k=st.integers(min_value=1, max_value=5))
def test_symplectic_complement_is_an_involution(seed, k):
    rng = np.random.default_rng(seed)
    delta = standard_form(3)
    L = SubspaceBasis(6, rng.normal(size=(6, k)))
    twice = symplectic_complement(symplectic_complement(L, delta), delta)
    assert same_span(twice, L)


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_isotropic_partner_random_with_avoided_pair(seed):
    rng = np.random.default_rng(seed)
    s = 4
    delta = standard_form(s)
    S = random_symplectic(rng, s)
    L = SubspaceBasis(2 * s, S[:, [0, 2]])
    avoid = SubspaceBasis(2 * s, S[:, 4:6])
    partner = isotropic_partner(L, avoid, delta)
    assert partner.dim == 2
    assert is_isotropic(partner, delta)
    assert_allclose(pairing_matrix(L, partner, delta), -np.eye(2), atol=1e-9)
    joint = np.hstack([L.vectors, avoid.vectors, partner.vectors])
    assert np.linalg.matrix_rank(joint, tol=1e-8) == 6
