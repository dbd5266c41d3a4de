import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hiconn import (
    AffineConnection,
    Chart,
    DifferentialForm,
    HigherConnection,
    MultiVectorField,
    SamplePlan,
    TwistFields,
    cov_form,
    lower_induced_from,
    parse,
    snb,
    torsion,
    torsion_report,
    upper_induced_from,
    wedge,
)
from hiconn.connection import (
    affine_cov,
    almost_torsion_free_family,
    cov_form_value,
    induced_cov,
    probe_twist,
    recover,
    symmetrize_twist,
)
from hiconn.errors import DegreeMismatch, InvalidSeed
from hiconn.exterior import coordinate_form
from hiconn.randomfields import random_affine, random_form, random_mvf, random_polynomial, random_twist

C2, C3 = Chart(2), Chart(3)
P3 = SamplePlan.uniform(C3, 12, seed=21)
FLAT3 = AffineConnection.flat(C3)


def basis(*I, chart=C3):
    return MultiVectorField.basis(chart, I)


def field(coeffs, chart=C3):
    k = len(next(iter(coeffs)))
    return MultiVectorField(chart, k, coeffs)


def close(a, b, tol=1e-12):
    return a.residual(b, P3.points) <= tol


def test_affine_cov_examples():
    assert close(affine_cov(FLAT3, basis(0), field({(1,): "x0"})), basis(1))
    assert close(affine_cov(FLAT3, basis(0), field({(1, 2): "x0"})), basis(1, 2))
    base = AffineConnection.from_entries(C3, {(1, 0, 0): 1.0})
    assert close(affine_cov(base, basis(0), basis(0)), basis(1))


def test_induced_examples():
    got = induced_cov(FLAT3, basis(0, 1), field({(2,): "x0"}))
    assert close(got, -basis(1, 2))
    f = parse("x0*x1 + x2^2", C3)
    X = field({(0,): "x1", (2,): "1"})
    got = induced_cov(FLAT3, X, MultiVectorField.scalar_field(f))
    want = MultiVectorField.scalar_field(f.partial(0) * C3.coord(1) + f.partial(2))
    assert close(got, want)
    const = induced_cov(FLAT3, field({(0, 1): 2.0, (1, 2): -1.0}), field({(0,): 3.0}))
    assert const.is_zero


def test_twist_contraction_example():
    F = TwistFields(C3, {(1, 2): {((0, 1), (0,), (0, 1)): "x1"}})
    conn = HigherConnection(FLAT3, F)
    assert close(conn.cov(basis(0), basis(0, 1)), field({(0, 1): "x1"}))
    zero = HigherConnection(FLAT3, TwistFields.zero(C3))
    X, Y = field({(0, 2): "x1"}), field({(1,): "x0*x2"})
    assert close(zero.cov(X, Y), induced_cov(FLAT3, X, Y))


def test_twist_validation():
    with pytest.raises(InvalidSeed):
        TwistFields(C3, {(1, 1): {((0,), (0,), (1,)): 1.0}})
    with pytest.raises(DegreeMismatch):
        TwistFields(C3, {(2, 3): {((0, 1, 2, 2), (0, 1), (0, 1, 2)): 1.0}})
    with pytest.raises(DegreeMismatch):
        TwistFields(C3, {(1, 2): {((0,), (0,), (0, 1)): 1.0}})


@given(st.integers(0, 2**32 - 1))
def test_decompose_round_trip(seed):
    rng = np.random.default_rng(seed)
    base, F = random_affine(C3, rng), random_twist(C3, rng)
    conn = HigherConnection(base, F)
    b2, F2 = recover(conn.cov, C3)
    assert F2.residual(F, P3) < 1e-10
    for k in range(3):
        for i in range(3):
            for j in range(3):
                diff = b2.gamma[k][i][j] - base.gamma[k][i][j]
                assert np.max(np.abs(diff.values(P3.points))) < 1e-10
    for v in probe_twist(conn.cov, base, 1, 1).values():
        assert np.max(np.abs(v.values(P3.points))) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 3))
def test_leibniz_axiom(seed, k, l):
    rng = np.random.default_rng(seed)
    conn = HigherConnection(random_affine(C3, rng), random_twist(C3, rng))
    X, Y = random_mvf(C3, k, rng), random_mvf(C3, l, rng)
    f = random_polynomial(C3, rng)
    lhs = conn.cov(X, Y * f)
    rhs = wedge(snb(X, MultiVectorField.scalar_field(f)), Y) + conn.cov(X, Y) * f
    assert lhs.residual(rhs, P3.points) < 1e-8


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_function_linearity_in_x(seed, k, l):
    rng = np.random.default_rng(seed)
    conn = HigherConnection(random_affine(C3, rng), random_twist(C3, rng))
    X, Y = random_mvf(C3, k, rng), random_mvf(C3, l, rng)
    f = random_polynomial(C3, rng)
    assert conn.cov(X * f, Y).residual(conn.cov(X, Y) * f, P3.points) < 1e-8


# --- torsion ------------------------------------------------------------------

@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_flat_induced_is_torsion_free(seed, k, l):
    rng = np.random.default_rng(seed)
    conn = HigherConnection.induced(FLAT3)
    T = torsion(conn, random_mvf(C3, k, rng), random_mvf(C3, l, rng))
    assert T.max_abs(P3.points) < 1e-8


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_torsion_symmetries(seed, k, l):
    rng = np.random.default_rng(seed)
    conn = HigherConnection(random_affine(C3, rng), random_twist(C3, rng))
    X, Y = random_mvf(C3, k, rng), random_mvf(C3, l, rng)
    f = random_polynomial(C3, rng)
    T = torsion(conn, X, Y)
    s = (-1) ** ((k - 1) * (l - 1))
    assert (T + torsion(conn, Y, X) * s).max_abs(P3.points) < 1e-8
    assert torsion(conn, X * f, Y).residual(T * f, P3.points) < 1e-8


def test_symmetrize_examples(rng):
    assert symmetrize_twist(TwistFields.zero(C3)).is_zero
    F = symmetrize_twist(random_twist(C3, rng))
    assert symmetrize_twist(F).residual(F * 2.0, P3) < 1e-10


@given(st.integers(0, 2**32 - 1))
def test_symmetric_data_is_torsion_free(seed):
    rng = np.random.default_rng(seed)
    conn = HigherConnection(random_affine(C3, rng, symmetric=True), symmetrize_twist(random_twist(C3, rng)))
    assert torsion_report(conn, P3, almost=False).max_residual < 1e-8


def test_asymmetric_base_is_detected():
    base = AffineConnection.from_entries(C3, {(0, 1, 2): "x0"})
    rep = torsion_report(HigherConnection.induced(base), P3)
    assert not rep.torsion_free
    assert rep.max_residual > 1e-3


def test_almost_family_members_have_vanishing_wedge(rng):
    for X, Y in almost_torsion_free_family(C3, rng):
        assert wedge(X, Y).max_abs(P3.points) < 1e-10


# --- upper and lower induced twists -------------------------------------------

def test_upper_induced_examples():
    assert upper_induced_from(FLAT3, {2: {}}).is_zero
    F = upper_induced_from(FLAT3, {2: {((0, 2), (1, 2), (2,)): 1.0}})
    for (k, l) in F.entries:
        assert k != 1
    # F^{2,2}(d12, d12) = -F^{2,1}(d12, d2) ^ d1 = -d02 ^ d1 = d012
    assert F.coefficient(2, 2, (0, 1, 2), (1, 2), (1, 2))((0, 0, 0)) == 1.0
    assert F.coefficient(2, 1, (0, 2), (1, 2), (2,))((0, 0, 0)) == 1.0


def test_lower_induced_examples():
    assert lower_induced_from(FLAT3, {2: {}}).is_zero
    F = lower_induced_from(FLAT3, {2: {((0, 1), (0,), (1, 2)): 1.0}})
    for (k, l) in F.entries:
        assert l != 1
    # F^{2,2}(d02, d12) = (-1)^(2-1) d2 ^ F^{1,2}(d0, d12) = -d2 ^ d01 = -d012
    assert F.coefficient(2, 2, (0, 1, 2), (0, 2), (1, 2))((0, 0, 0)) == -1.0


def test_seed_validation():
    with pytest.raises(InvalidSeed):
        upper_induced_from(FLAT3, {1: {((0,), (0,), (1,)): 1.0}})
    with pytest.raises(InvalidSeed):
        upper_induced_from(FLAT3, {2: {((0, 1), (0, 1), (0, 1)): 1.0}})


@given(st.integers(0, 2**32 - 1))
def test_upper_induced_respects_wedge_rule(seed):
    rng = np.random.default_rng(seed)
    seeds = {2: {((0, 1), (0, 2), (j,)): float(rng.normal()) for j in range(3)}}
    F = upper_induced_from(FLAT3, seeds)
    X = field({(0, 2): "1"})
    Y1, Y2 = random_mvf(C3, 1, rng, degree=0), random_mvf(C3, 1, rng, degree=0)
    lhs = F.apply(X, wedge(Y1, Y2))
    rhs = wedge(F.apply(X, Y1), Y2) - wedge(F.apply(X, Y2), Y1)
    assert lhs.residual(rhs, P3.points) < 1e-10


# --- covariant derivative of forms --------------------------------------------

def test_cov_form_example():
    conn = HigherConnection.induced(FLAT3)
    w = DifferentialForm(C3, 2, {(0, 1): C3.coord(0)})
    got = cov_form(conn, basis(0), w)
    assert got.residual(coordinate_form(C3, (0, 1)), P3.points) < 1e-14
    assert cov_form_value(conn, basis(0), w, basis(0, 1))((0.2, 0.1, 0.3)) == 1.0


def test_cov_form_degree_edge_cases():
    conn = HigherConnection.induced(FLAT3)
    w = DifferentialForm(C3, 1, {(0,): "x1"})
    assert cov_form(conn, MultiVectorField.scalar_field(C3.coord(0)), w).is_zero
    assert cov_form(conn, basis(0, 1, 2), w).is_zero


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_cov_form_is_function_linear(seed, k, l):
    rng = np.random.default_rng(seed)
    if l - k + 1 < 0:
        return
    conn = HigherConnection(random_affine(C3, rng), random_twist(C3, rng))
    X, w = random_mvf(C3, k, rng), random_form(C3, l, rng)
    f = random_polynomial(C3, rng)
    assert cov_form(conn, X * f, w).residual(cov_form(conn, X, w) * f, P3.points) < 1e-8


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_cov_form_probe_matches_direct(seed, k, l):
    rng = np.random.default_rng(seed)
    m = l - k + 1
    if m < 0:
        return
    conn = HigherConnection(random_affine(C3, rng), random_twist(C3, rng))
    X, w, Y = random_mvf(C3, k, rng), random_form(C3, l, rng), random_mvf(C3, m, rng)
    from hiconn import pair
    lhs = pair(cov_form(conn, X, w), Y)
    rhs = cov_form_value(conn, X, w, Y)
    assert np.max(np.abs((lhs - rhs).values(P3.points))) < 1e-8
