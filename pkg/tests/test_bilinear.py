import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import forms_at, gram_rank_oracle

from hiconn import (
    AffineConnection,
    BilinearFormEta,
    Chart,
    DifferentialForm,
    HigherConnection,
    Metric,
    MultiVectorField,
    SamplePlan,
    classify_eta,
    construct_parallel,
    d,
    eta_from_forms,
    forms_from_eta,
    is_parallel,
    levi_civita,
    lie,
    pair,
    parse,
    wedge,
)
from hiconn.bilinear import (
    closed_identity_check,
    e_field,
    form_inner,
    gram_rank,
    nabla_eta,
    nondegenerate_at,
    sharp,
)
from hiconn.errors import DegreeError, DivisionByZero, NotClosed, NotInBCircle, VanishingNorm
from hiconn.exterior import coordinate_form
from hiconn.randomfields import random_form, random_metric, random_mvf, random_polynomial

C2, C3 = Chart(2), Chart(3)
P2 = SamplePlan.uniform(C2, 20, seed=31)
P3 = SamplePlan.uniform(C3, 12, seed=32)


def form(chart, coeffs):
    k = len(next(iter(coeffs)))
    return DifferentialForm(chart, k, coeffs)


def b(chart, *I):
    return MultiVectorField.basis(chart, I)


def symplectic(chart=C2, coeff="1"):
    return BilinearFormEta(chart, {2: form(chart, {(0, 1): coeff})})


def test_eta_examples():
    eta = symplectic()
    assert eta(b(C2, 0), b(C2, 1))((0, 0)) == 1
    assert eta(b(C2, 1), b(C2, 0))((0, 0)) == -1
    assert eta(b(C2, 0, 1), b(C2, 0, 1)).is_zero


@given(st.integers(0, 2**32 - 1))
def test_eta_round_trip(seed):
    rng = np.random.default_rng(seed)
    forms = [random_form(C3, t, rng) for t in range(4)]
    back = forms_from_eta(eta_from_forms(C3, forms), C3)
    for w, w2 in zip(forms, back):
        assert w.residual(w2, P3.points) < 1e-12


def test_zero_collection_is_zero_eta():
    eta = BilinearFormEta(C3, [])
    assert eta.is_zero
    assert all(w.is_zero for w in forms_from_eta(eta, C3))


@given(st.integers(0, 2**32 - 1), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_associative_and_graded_symmetric(seed, k, l, m):
    rng = np.random.default_rng(seed)
    eta = eta_from_forms(C3, [random_form(C3, t, rng) for t in range(4)])
    X, Y, Z = random_mvf(C3, k, rng), random_mvf(C3, l, rng), random_mvf(C3, m, rng)
    lhs, rhs = eta(wedge(X, Y), Z), eta(X, wedge(Y, Z))
    assert np.max(np.abs((lhs - rhs).values(P3.points))) < 1e-8
    s = (-1) ** (k * l)
    assert np.max(np.abs((eta(X, Y) - eta(Y, X) * s).values(P3.points))) < 1e-8


def test_nondegeneracy_examples():
    assert nondegenerate_at(symplectic(), (0.3, 0.2))
    assert gram_rank(symplectic(), (0.3, 0.2)) == 4
    assert not nondegenerate_at(BilinearFormEta(C2, {1: form(C2, {(0,): 1.0})}), (0, 0))
    eta = symplectic(coeff="x0")
    assert not nondegenerate_at(eta, (0, 0))
    assert nondegenerate_at(eta, (1, 0))


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]), st.booleans())
def test_nondegeneracy_matches_gram_oracle(seed, n, degenerate):
    rng = np.random.default_rng(seed)
    chart = Chart(n)
    forms = [random_form(chart, t, rng, degree=1) for t in range(n + 1)]
    top = tuple(range(n))
    forms[n] = DifferentialForm(chart, n, {top: chart.coord(0) * (random_polynomial(chart, rng, 0) + 2.0)})
    eta = eta_from_forms(chart, forms)
    p = rng.uniform(-1, 1, n)
    if degenerate:
        p[0] = 0.0
    want = gram_rank_oracle(forms_at(eta, p), n) == 2 ** n
    assert nondegenerate_at(eta, p) == want
    assert gram_rank(eta, p) == gram_rank_oracle(forms_at(eta, p), n)


def test_closed_identity_examples():
    plan = P2
    const = BilinearFormEta(C2, {1: form(C2, {(0,): 2.0, (1,): -1.0}), 2: form(C2, {(0, 1): 3.0})})
    r = closed_identity_check(const, [b(C2, 0), b(C2, 1)], plan)
    assert r.residual == 0.0
    exact = BilinearFormEta(C2, {2: d(form(C2, {(1,): "x0^2"}))})
    rng = np.random.default_rng(5)
    Xs = [random_mvf(C2, 1, rng) for _ in range(2)]
    assert closed_identity_check(exact, Xs, plan).residual < 1e-8
    one = BilinearFormEta(C2, {1: form(C2, {(0,): "x0"})})
    assert closed_identity_check(one, [b(C2, 0), b(C2, 1)], plan).residual < 1e-12


def test_closed_identity_rejects_non_closed():
    with pytest.raises(NotClosed):
        closed_identity_check(BilinearFormEta(C2, {1: form(C2, {(0,): "x1"})}), [b(C2, 0)], P2)


# --- metric side ------------------------------------------------------------

def test_inner_product_examples():
    g = Metric.identity(C3)
    assert form_inner(coordinate_form(C3, (0, 1)), coordinate_form(C3, (0, 1)), g)((0, 0, 0)) == 1
    assert form_inner(coordinate_form(C3, (0, 1)), coordinate_form(C3, (0, 2)), g)((0, 0, 0)) == 0
    g2 = Metric(C2, [[1, 0], [0, 4]])
    w = coordinate_form(C2, (0, 1))
    assert form_inner(w, w, g2)((0.5, 0.5)) == pytest.approx(0.25)


def test_sharp_examples():
    g = Metric.identity(C2)
    assert sharp(coordinate_form(C2, (0, 1)), g).residual(b(C2, 0, 1), P2.points) < 1e-15
    g2 = Metric(C2, [[1, 0], [0, 4]])
    assert sharp(coordinate_form(C2, (1,)), g2).residual(b(C2, 1) * 0.25, P2.points) < 1e-15


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_sharp_pairs_to_inner_product(seed, t):
    rng = np.random.default_rng(seed)
    g = random_metric(C3, rng)
    w = random_form(C3, t, rng, degree=1)
    lhs = pair(w, sharp(w, g))
    rhs = form_inner(w, w, g)
    assert np.max(np.abs((lhs - rhs).values(P3.points))) < 1e-8


def test_e_field_examples():
    g = Metric.identity(C2)
    assert e_field(coordinate_form(C2, (0, 1)), g, P2).residual(b(C2, 0, 1), P2.points) < 1e-15
    E = e_field(form(C2, {(0, 1): "1 + x0^2"}), g, P2)
    want = b(C2, 0, 1) * parse("1/(1 + x0^2)", C2)
    assert E.residual(want, P2.points) < 1e-12
    zero_plan = SamplePlan(np.vstack([P2.points, [[0.0, 0.3]]]), seed=0)
    with pytest.raises(VanishingNorm):
        e_field(form(C2, {(0, 1): "x0"}), g, zero_plan)


def test_singular_metric_reports_point():
    g = Metric(C2, [["x0", 0], [0, 1]])
    plan = SamplePlan(np.array([[0.5, 0.1], [0.0, 0.2]]), seed=0)
    with pytest.raises(DivisionByZero) as info:
        g.check_nonsingular(plan)
    assert info.value.point is not None


@given(st.integers(0, 2**32 - 1))
def test_levi_civita_is_symmetric_and_metric(seed):
    rng = np.random.default_rng(seed)
    g = random_metric(C3, rng)
    lc = levi_civita(g)
    assert lc.is_symmetric(P3, 1e-10)
    # d_k g_ij = g(nabla_k d_i, d_j) + g(d_i, nabla_k d_j)
    for k in range(3):
        for i in range(3):
            for j in range(3):
                rhs = sum((lc.gamma[a][k][i] * g.g[a][j] + lc.gamma[a][k][j] * g.g[i][a] for a in range(3)),
                          C3.const(0.0))
                diff = g.g[i][j].partial(k) - rhs
                assert np.max(np.abs(diff.values(P3.points))) < 1e-10


# --- nabla eta, parallelism, classification, construction -------------------

def test_nabla_eta_examples():
    flat = HigherConnection.induced(AffineConnection.flat(C3))
    assert nabla_eta(flat, BilinearFormEta(C3, []), b(C3, 0), b(C3, 1), b(C3, 2)).is_zero
    const = BilinearFormEta(C3, {2: form(C3, {(0, 1): 2.0}), 3: form(C3, {(0, 1, 2): -1.0})})
    for X, Y, Z in [(b(C3, 0), b(C3, 1), b(C3, 2)), (b(C3, 1, 2), b(C3, 0), MultiVectorField.scalar_field(C3.const(1.0)))]:
        assert nabla_eta(flat, const, X, Y, Z).is_zero or np.max(np.abs(nabla_eta(flat, const, X, Y, Z).values(P3.points))) == 0
    with pytest.raises(DegreeError):
        nabla_eta(flat, const, b(C3, 0, 1), b(C3, 0, 1), b(C3, 2))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_nabla_eta_on_functions_is_lie(seed, k):
    rng = np.random.default_rng(seed)
    eta = eta_from_forms(C3, [random_form(C3, t, rng) for t in range(4)])
    from hiconn.randomfields import random_affine, random_twist
    conn = HigherConnection(random_affine(C3, rng), random_twist(C3, rng))
    X = random_mvf(C3, k, rng)
    f, g = random_polynomial(C3, rng), random_polynomial(C3, rng)
    lhs = nabla_eta(conn, eta, X, MultiVectorField.scalar_field(f), MultiVectorField.scalar_field(g))
    rhs = lie(X, eta.omega(k - 1)).scalar * f * g
    assert np.max(np.abs((lhs - rhs).values(P3.points))) < 1e-8


def test_parallel_examples():
    flat = HigherConnection.induced(AffineConnection.flat(C2))
    assert is_parallel(flat, symplectic(), P2).parallel
    rep = is_parallel(flat, symplectic(coeff="1 + x0^2"), P2)
    assert not rep.parallel
    assert rep.max_residual == pytest.approx(np.max(np.abs(2 * P2.points[:, 0])))


def test_classification_examples():
    c = classify_eta(symplectic(), P2)
    assert c.in_B_circle and c.in_B_plectic
    assert not classify_eta(BilinearFormEta(C2, {1: form(C2, {(0,): 1.0})}), P2).in_B_circle
    plan = SamplePlan(np.vstack([P2.points, [[0.0, 0.5]]]), seed=0)
    assert not classify_eta(symplectic(coeff="x0"), plan).in_B_circle


def test_construct_examples():
    flat = AffineConnection.flat(C2)
    conn = construct_parallel(symplectic(), base=flat, plan=P2)
    assert conn.twist.max_abs(P2) == 0
    conn = construct_parallel(symplectic(coeff="1 + x0^2"), base=flat, plan=P2)
    F = conn.twist.coefficient(1, 2, (0, 1), (0,), (0, 1))
    want = parse("2*x0/(1 + x0^2)", C2)
    assert np.max(np.abs((F - want).values(P2.points))) < 1e-12
    assert is_parallel(conn, symplectic(coeff="1 + x0^2"), P2).max_residual < 1e-12
    with pytest.raises(NotInBCircle):
        construct_parallel(BilinearFormEta(C2, {1: form(C2, {(0,): 1.0})}), plan=P2)
    assert construct_parallel(BilinearFormEta(C2, []), plan=P2).twist.is_zero
