import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hiconn.errors import DegreeMismatch, DependentInput, RankDeficient
from hiconn.multilinear import (
    KVector,
    Subspace,
    check_multi_index,
    complement,
    dual_separator,
    merge_sign,
    multi_indices,
    numeric_rank,
    pair_covector,
    plucker,
    sort_sign,
    subspaces_intersect,
    top_coefficient,
    wedge_all,
)

e = lambda n, *I: KVector.basis(n, I)


def minors_oracle(V):
    """Plücker coordinates of the row space of V via numpy determinants."""
    k, n = V.shape
    return {I: np.linalg.det(V[:, list(I)]) for I in itertools.combinations(range(n), k)}


def test_merge_sign_examples():
    assert merge_sign((0,), (1,)) == (1, (0, 1))
    assert merge_sign((1,), (0,)) == (-1, (0, 1))
    assert merge_sign((0, 1), (1,))[0] == 0


def test_check_multi_index_rejects_bad_keys():
    with pytest.raises(ValueError):
        check_multi_index((1, 0), 3)
    with pytest.raises(ValueError):
        check_multi_index((0, 3), 3)
    assert check_multi_index([0, 2], 3) == (0, 2)


@given(st.permutations(range(5)))
def test_sort_sign_matches_permutation_parity(perm):
    s, out = sort_sign(perm)
    inversions = sum(1 for i, j in itertools.combinations(range(5), 2) if perm[i] > perm[j])
    assert out == tuple(range(5))
    assert s == (-1) ** inversions


def test_wedge_examples():
    assert (e(2, 0) ^ e(2, 1)) == e(2, 0, 1)
    assert (e(2, 1) ^ e(2, 0)) == -e(2, 0, 1)
    u = KVector.vector([1, 1])
    v = KVector.vector([1, -1])
    assert (u ^ v) == -2 * e(2, 0, 1)


def test_wedge_of_dependent_vectors_is_zero():
    u = KVector.vector([1, 2, 3])
    assert (u ^ (2 * u)).is_zero(1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_wedge_matches_minor_oracle(seed, k):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(k, 5))
    w = wedge_all((KVector.vector(r) for r in V), 5)
    for I, m in minors_oracle(V).items():
        assert w[I] == pytest.approx(m, abs=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_wedge_associative_and_graded_commutative(seed):
    rng = np.random.default_rng(seed)
    n = 5
    a = KVector.from_array(n, 1, rng.normal(size=5))
    b = KVector.from_array(n, 2, rng.normal(size=10))
    c = KVector.from_array(n, 2, rng.normal(size=10))
    assert (((a ^ b) ^ c) - (a ^ (b ^ c))).max_abs() < 1e-12
    assert ((a ^ b) - (b ^ a)).max_abs() < 1e-12
    assert ((b ^ c) - (c ^ b)).max_abs() < 1e-12


def test_plucker_examples():
    assert plucker(Subspace(np.array([[1, 0, 0], [0, 1, 0]]))) == e(3, 0, 1)
    assert plucker(Subspace(np.array([[1, 1, 0], [0, 1, 0]]))) == e(3, 0, 1)
    with pytest.raises(RankDeficient):
        plucker(Subspace(np.array([[1, 0, 0], [2, 0, 0]])))


def test_subspaces_intersect_examples():
    W = Subspace(np.array([[1, 0, 0, 0], [0, 1, 0, 0]]))
    assert subspaces_intersect(W, Subspace(np.array([[0, 1, 0, 0], [0, 0, 1, 0]])))
    assert not subspaces_intersect(W, Subspace(np.array([[0, 0, 1, 0], [0, 0, 0, 1]])))


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.booleans())
def test_subspaces_intersect_matches_rank(seed, k, force):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(k, 5))
    B = rng.normal(size=(k, 5))
    if force:
        B[0] = rng.normal(size=k) @ A
    expected = np.linalg.matrix_rank(np.vstack([A, B])) < 2 * k
    assert subspaces_intersect(Subspace(A), Subspace(B)) == expected


@given(st.integers(0, 2**32 - 1))
def test_plucker_det_covariance(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 5))
    A = rng.normal(size=(3, 3))
    lhs = plucker(Subspace(A @ B))
    rhs = np.linalg.det(A) * plucker(Subspace(B))
    assert (lhs - rhs).max_abs() < 1e-8 * max(1.0, rhs.max_abs())


def test_pairing_examples():
    assert pair_covector(e(3, 0, 1), e(3, 0, 1)) == 1
    assert pair_covector(e(3, 0, 1), e(3, 0, 2)) == 0
    omega = (e(3, 0) + e(3, 1)) ^ e(3, 2)
    v = e(3, 0) ^ (e(3, 1) + e(3, 2))
    assert pair_covector(omega, v) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_pairing_is_determinant_of_evaluations(seed):
    rng = np.random.default_rng(seed)
    phis = rng.normal(size=(3, 4))
    vs = rng.normal(size=(3, 4))
    omega = wedge_all((KVector.vector(r) for r in phis), 4)
    v = wedge_all((KVector.vector(r) for r in vs), 4)
    assert pair_covector(omega, v) == pytest.approx(np.linalg.det(phis @ vs.T), abs=1e-10)


def test_separator_examples():
    u = dual_separator([e(3, 0, 1)], 3)
    assert u.k == 1
    assert top_coefficient(u ^ e(3, 0, 1)) != 0
    u = dual_separator([e(3, 0, 1), e(3, 0, 2)], 3)
    assert top_coefficient(u ^ e(3, 0, 1)) != 0
    assert abs(top_coefficient(u ^ e(3, 0, 2))) < 1e-14
    with pytest.raises(DependentInput):
        dual_separator([e(3, 0, 1), 2 * e(3, 0, 1)], 3)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 4))
def test_separator_property(seed, k, m):
    rng = np.random.default_rng(seed)
    n = 5
    vs = [KVector.from_array(n, k, rng.normal(size=len(multi_indices(n, k)))) for _ in range(m)]
    u = dual_separator(vs, n)
    assert abs(top_coefficient(u ^ vs[0])) > 1e-8
    for v in vs[1:]:
        assert abs(top_coefficient(u ^ v)) < 1e-9


def test_complement_and_top():
    assert complement((0, 2), 4) == (1, 3)
    with pytest.raises(DegreeMismatch):
        top_coefficient(e(3, 0, 1))


def test_numeric_rank_agrees_with_numpy(rng):
    for _ in range(20):
        r = int(rng.integers(0, 5))
        M = rng.normal(size=(5, r)) @ rng.normal(size=(r, 6)) if r else np.zeros((5, 6))
        assert numeric_rank(M) == np.linalg.matrix_rank(M)


def test_mixed_degree_addition_fails():
    with pytest.raises(DegreeMismatch):
        e(3, 0) + e(3, 0, 1)
