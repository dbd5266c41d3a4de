"""Named verification suites: each returns residual checks on seeded random instances.

The same suites back the ``hiconn run`` command and the acceptance tests.
A check passes when its residual is at most the tolerance; checks built with
``want_zero=False`` pass when the residual exceeds it (detection checks), and
checks with no expectation are reported as INFO.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bilinear as bl
from .connection import (
    AffineConnection,
    HigherConnection,
    TwistFields,
    cov_form,
    cov_form_value,
    higher_cov,
    lower_induced_from,
    recover,
    symmetrize_twist,
    torsion,
    torsion_report,
    upper_induced_from,
)
from .errors import BaseNotTorsionFree, HiconnError, NotInBCircle, VanishingNorm
from .exterior import (
    DifferentialForm,
    MultiVectorField,
    d,
    directional,
    interior_fn,
    interior_form,
    lie,
    pair,
    snb,
    wedge,
    wedge_all,
)
from .multilinear import multi_indices
from .randomfields import (
    random_affine,
    random_form,
    random_metric,
    random_mvf,
    random_polynomial,
    random_twist,
)
from .scalar import Chart, SamplePlan, ScalarField


@dataclass
class Check:
    suite: str
    id: str
    identity: str
    residual: float
    tol: float
    verdict: str

    def line(self) -> str:
        return f"{self.suite}\t{self.id}\t{self.identity}\t{self.residual:.3e}\t{self.verdict}"

    @property
    def failed(self) -> bool:
        return self.verdict == "FAIL"


@dataclass
class SuiteContext:
    chart: Chart
    plan: SamplePlan
    tol: float = 1e-8
    seed: int = 0
    instances: int = 50
    random_connections: int = 20
    connection: HigherConnection | None = None
    base: AffineConnection | None = None
    metric: "bl.Metric | None" = None
    eta: "bl.BilinearFormEta | None" = None
    mvfs: dict = field(default_factory=dict)
    forms: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)

    def rng(self, tag: str) -> np.random.Generator:
        """Independent stream per check, stable across runs and check order."""
        return np.random.default_rng([self.seed, zlib.crc32(tag.encode())])

    @property
    def n(self) -> int:
        return self.chart.dim


class _Collector:
    def __init__(self, suite: str, ctx: SuiteContext):
        self.suite = suite
        self.ctx = ctx
        self.checks: list[Check] = []

    def add(self, cid: str, identity: str, residual: float, *, tol: float | None = None,
            want_zero: bool | None = True):
        tol = self.ctx.tol if tol is None else tol
        residual = float(residual)
        if want_zero is None:
            verdict = "INFO"
        elif want_zero:
            verdict = "PASS" if residual <= tol else "FAIL"
        else:
            verdict = "PASS" if residual > tol else "FAIL"
        self.checks.append(Check(self.suite, cid, identity, residual, tol, verdict))

    def result(self) -> list[Check]:
        return sorted(self.checks, key=lambda c: c.id)


def _res(a, b, plan: SamplePlan) -> float:
    if isinstance(a, ScalarField):
        diff = a - b
        return 0.0 if diff.is_zero else float(np.max(np.abs(diff.values(plan.points))))
    return a.residual(b, plan.points)


def _norm(a, plan: SamplePlan) -> float:
    if isinstance(a, ScalarField):
        return 0.0 if a.is_zero else float(np.max(np.abs(a.values(plan.points))))
    return a.max_abs(plan.points)


def _sign(e: int) -> int:
    return -1 if e % 2 else 1


def _pool(named: dict, degree: int) -> list:
    return [v for _, v in sorted(named.items()) if v.degree == degree]


def _mvf(ctx: SuiteContext, rng, k: int, i: int = 0) -> MultiVectorField:
    """Named MVF of degree k if the spec file supplies one for slot i, else random."""
    pool = _pool(ctx.mvfs, k)
    if pool and i % 2 == 0:
        return pool[(i // 2) % len(pool)]
    return random_mvf(ctx.chart, k, rng)


def _form(ctx: SuiteContext, rng, l: int, i: int = 0) -> DifferentialForm:
    pool = _pool(ctx.forms, l)
    if pool and i % 2 == 0:
        return pool[(i // 2) % len(pool)]
    return random_form(ctx.chart, l, rng)


def _decomposable(chart, rng, k):
    factors = [random_mvf(chart, 1, rng, degree=1) for _ in range(k)]
    return factors, wedge_all(chart, factors, MultiVectorField) if factors else \
        MultiVectorField.scalar_field(chart.const(1.0))


# ---------------------------------------------------------------------------
# Schouten–Nijenhuis bracket

def snb_suite(ctx: SuiteContext) -> list[Check]:
    out = _Collector("snb", ctx)
    n, plan = ctx.n, ctx.plan
    worst = dict.fromkeys(["antisymmetry", "jacobi", "leibniz", "function", "vector"], 0.0)
    rng = ctx.rng("snb")
    for i in range(ctx.instances):
        p, q, r = (int(v) for v in rng.integers(0, n + 1, size=3))
        P, Q, R = _mvf(ctx, rng, p, i), _mvf(ctx, rng, q, i + 1), _mvf(ctx, rng, r, i + 2)
        # graded antisymmetry
        lhs = snb(P, Q)
        worst["antisymmetry"] = max(worst["antisymmetry"],
                                    _norm(lhs + snb(Q, P) * _sign((p - 1) * (q - 1)), plan))
        # graded Jacobi
        jac = (snb(P, snb(Q, R)) * _sign((p - 1) * (r - 1))
               + snb(Q, snb(R, P)) * _sign((q - 1) * (p - 1))
               + snb(R, snb(P, Q)) * _sign((r - 1) * (q - 1)))
        worst["jacobi"] = max(worst["jacobi"], _norm(jac, plan))
        # derivation property
        if q + r <= n:
            leib = snb(P, wedge(Q, R)) - wedge(snb(P, Q), R) - wedge(Q, snb(P, R)) * _sign((p - 1) * q)
            worst["leibniz"] = max(worst["leibniz"], _norm(leib, plan))
        # bracket with a function
        f = random_polynomial(ctx.chart, rng)
        F = MultiVectorField.scalar_field(f)
        expected = interior_fn(f, P) * _sign(p - 1) if p >= 1 else MultiVectorField.zero(ctx.chart, -1)
        worst["function"] = max(worst["function"], _res(snb(P, F), expected, plan))
        # vector fields: [X, Y] acts as X Y - Y X on functions
        X, Y = _mvf(ctx, rng, 1, i), random_mvf(ctx.chart, 1, rng)
        br = snb(X, Y)
        comm = directional(X, directional(Y, f)) - directional(Y, directional(X, f))
        worst["vector"] = max(worst["vector"], _res(directional(br, f), comm, plan))
    out.add("snb.antisymmetry", "[P,Q] = -(-1)^((p-1)(q-1)) [Q,P]", worst["antisymmetry"])
    out.add("snb.jacobi", "graded Jacobi identity, cyclic sum vanishes", worst["jacobi"])
    out.add("snb.leibniz", "[P,Q^R] = [P,Q]^R + (-1)^((p-1)q) Q^[P,R]", worst["leibniz"])
    out.add("snb.function", "[X,f] = (-1)^(k-1) i_f X", worst["function"])
    out.add("snb.vector_bracket", "[X,Y] f = X(Y f) - Y(X f) for vector fields", worst["vector"])
    return out.result()


# ---------------------------------------------------------------------------
# interior products, Lie derivatives, covariant derivatives of forms

def forms_suite(ctx: SuiteContext) -> list[Check]:
    out = _Collector("forms", ctx)
    n, plan, chart = ctx.n, ctx.plan, ctx.chart
    keys = ["i_wedge", "i_commute", "if_product", "if_wedge", "snb_fX", "i_alpha", "lie_f", "lie_fX",
            "lie_d", "lie_i", "lie_bracket", "lie_wedge"]
    worst = dict.fromkeys(keys, 0.0)
    rng = ctx.rng("forms")
    count = max(ctx.instances // 2, 1)
    for i in range(count):
        k = int(rng.integers(1, n + 1))
        l = int(rng.integers(1, n + 1))
        m = int(rng.integers(0, n + 1))
        X, Y = _mvf(ctx, rng, k, i), _mvf(ctx, rng, l, i + 1)
        w = _form(ctx, rng, m, i)
        f, g = random_polynomial(chart, rng), random_polynomial(chart, rng)
        # i_{X^Y} = i_Y i_X and graded commutation
        worst["i_wedge"] = max(worst["i_wedge"],
                               _res(interior_form(wedge(X, Y), w), interior_form(Y, interior_form(X, w)), plan))
        worst["i_commute"] = max(worst["i_commute"], _res(
            interior_form(Y, interior_form(X, w)), interior_form(X, interior_form(Y, w)) * _sign(k * l), plan))
        # interior product with functions
        worst["if_product"] = max(worst["if_product"], _res(
            interior_fn(f * g, X), interior_fn(f, X) * g + interior_fn(g, X) * f, plan))
        worst["if_wedge"] = max(worst["if_wedge"], _res(
            interior_fn(f, wedge(X, Y)), wedge(interior_fn(f, X), Y) + wedge(X, interior_fn(f, Y)) * _sign(k),
            plan))
        worst["snb_fX"] = max(worst["snb_fX"], _res(
            snb(X * f, Y), snb(X, Y) * f - wedge(X, interior_fn(f, Y)), plan))
        # i_X(α ^ ω) for decomposable X
        factors, Xd = _decomposable(chart, rng, k)
        alpha = random_form(chart, 1, rng)
        rhs = wedge(alpha, interior_form(Xd, w)) * _sign(k)
        for j, Xj in enumerate(factors):
            rest = factors[:j] + factors[j + 1:]
            Xrest = wedge_all(chart, rest, MultiVectorField) if rest else MultiVectorField.scalar_field(chart.const(1.0))
            rhs = rhs + interior_form(Xrest, w) * (pair(alpha, Xj) * _sign(j))
        worst["i_alpha"] = max(worst["i_alpha"], _res(interior_form(Xd, wedge(alpha, w)), rhs, plan))
        # Lie derivative identities
        F = MultiVectorField.scalar_field(f)
        worst["lie_f"] = max(worst["lie_f"], _res(
            lie(X, w * f), lie(X, w) * f + interior_form(snb(X, F), w), plan))
        df = d(DifferentialForm.scalar_field(f))
        worst["lie_fX"] = max(worst["lie_fX"], _res(
            lie(X * f, w), wedge(df, interior_form(X, w)) + lie(X, w) * f, plan))
        worst["lie_d"] = max(worst["lie_d"], _res(d(lie(X, w)), lie(X, d(w)) * _sign(k - 1), plan))
        XY = snb(X, Y)
        worst["lie_i"] = max(worst["lie_i"], _res(
            interior_form(XY, w),
            lie(X, interior_form(Y, w)) * _sign((k - 1) * l) - interior_form(Y, lie(X, w)), plan))
        if XY.degree >= 1:
            worst["lie_bracket"] = max(worst["lie_bracket"], _res(
                lie(XY, w), lie(X, lie(Y, w)) * _sign((k - 1) * (l - 1)) - lie(Y, lie(X, w)), plan))
        worst["lie_wedge"] = max(worst["lie_wedge"], _res(
            lie(wedge(X, Y), w), interior_form(Y, lie(X, w)) * _sign(l) + lie(Y, interior_form(X, w)), plan))
    out.add("interior.wedge", "i_(X^Y) = i_Y o i_X", worst["i_wedge"])
    out.add("interior.commute", "i_Y o i_X = (-1)^(kl) i_X o i_Y", worst["i_commute"])
    out.add("interior_fn.product", "i_(fg) X = g i_f X + f i_g X", worst["if_product"])
    out.add("interior_fn.wedge", "i_f(X^Y) = (i_f X)^Y + (-1)^k X^(i_f Y)", worst["if_wedge"])
    out.add("interior_fn.snb_scaling", "[fX,Y] = f[X,Y] - X^(i_f Y)", worst["snb_fX"])
    out.add("interior.one_form", "i_X(a^w) = sum_j (-1)^(j+1) a(X_j) i_X[j] w + (-1)^k a^i_X w", worst["i_alpha"])
    out.add("lie.function_scaling", "L_X(fw) = f L_X w + i_[X,f] w", worst["lie_f"])
    out.add("lie.scaled_field", "L_(fX) w = df^i_X w + f L_X w", worst["lie_fX"])
    out.add("lie.d_commute", "d L_X w = (-1)^(k-1) L_X d w", worst["lie_d"])
    out.add("lie.interior_bracket", "i_[X,Y] w = (-1)^((k-1)l) L_X i_Y w - i_Y L_X w", worst["lie_i"])
    out.add("lie.bracket", "L_[X,Y] w = (-1)^((k-1)(l-1)) L_X L_Y w - L_Y L_X w", worst["lie_bracket"])
    out.add("lie.wedge", "L_(X^Y) w = (-1)^l i_Y L_X w + L_Y i_X w", worst["lie_wedge"])
    out.checks.extend(_cov_form_checks(ctx))
    return out.result()


def _cov_form_checks(ctx: SuiteContext) -> list[Check]:
    out = _Collector("forms", ctx)
    n, plan, chart = ctx.n, ctx.plan, ctx.chart
    rng = ctx.rng("forms.cov")
    conn = ctx.connection or HigherConnection(random_affine(chart, rng), random_twist(chart, rng))
    keys = ["tensorial", "probe", "fX", "fw", "p925", "upper", "split"]
    worst = dict.fromkeys(keys, 0.0)
    # an upper-induced connection generated by random seeds
    seeds = {}
    for k in range(2, n + 1):
        seeds[k] = {(K, I, (j,)): random_polynomial(chart, rng, 1)
                    for K in multi_indices(n, k) for I in multi_indices(n, k) for j in range(n)}
    upper = HigherConnection(random_affine(chart, rng), upper_induced_from(AffineConnection.flat(chart), seeds))
    torsion_free_induced = HigherConnection.induced(random_affine(chart, rng, symmetric=True))
    count = max(ctx.instances // 5, 2)
    for i in range(count):
        k = int(rng.integers(1, n + 1))
        l = int(rng.integers(k - 1, n + 1))
        X = _mvf(ctx, rng, k, i)
        w = _form(ctx, rng, l, i)
        f = random_polynomial(chart, rng)
        Y = random_mvf(chart, l - k + 1, rng)
        # tensoriality in the argument, checked on the defining functional
        worst["tensorial"] = max(worst["tensorial"], _res(
            cov_form_value(conn, X, w, Y * f), cov_form_value(conn, X, w, Y) * f, plan))
        # probing on basis fields agrees with direct evaluation on a generic argument
        nab = cov_form(conn, X, w)
        worst["probe"] = max(worst["probe"], _res(pair(nab, Y), cov_form_value(conn, X, w, Y), plan))
        worst["fX"] = max(worst["fX"], _res(cov_form(conn, X * f, w), nab * f, plan))
        F = MultiVectorField.scalar_field(f)
        worst["fw"] = max(worst["fw"], _res(
            cov_form(conn, X, w * f), nab * f + interior_form(snb(X, F), w), plan))
        wl = _form(ctx, rng, k - 1, i)
        worst["p925"] = max(worst["p925"], _res(cov_form(conn, X, wl), lie(X, wl), plan))
        # upper-induced interior rule
        j = int(rng.integers(1, n + 1))
        W = random_mvf(chart, j, rng)
        lhs = cov_form(upper, X, interior_form(W, w))
        rhs = (interior_form(W, cov_form(upper, X, w)) + interior_form(higher_cov(upper, X, W), w)) * _sign(j * (k - 1))
        worst["upper"] = max(worst["upper"], _res(lhs, rhs, plan))
        # wedge splitting for torsion-free induced connections
        k2 = int(rng.integers(1, n + 1))
        l2 = int(rng.integers(1, n + 2 - k2)) if k2 < n else 0
        if l2 >= 1:
            A, B = random_mvf(chart, k2, rng), random_mvf(chart, l2, rng)
            m = int(rng.integers(k2 + l2 - 1, n + 1))
            wm = random_form(chart, m, rng)
            lhs = cov_form(torsion_free_induced, wedge(A, B), wm)
            rhs = (interior_form(B, cov_form(torsion_free_induced, A, wm)) * _sign(l2)
                   + interior_form(A, cov_form(torsion_free_induced, B, wm)) * _sign(k2 * (l2 - 1)))
            worst["split"] = max(worst["split"], _res(lhs, rhs, plan))
    out.add("covform.tensorial", "(nabla_X w)(fY) = f (nabla_X w)(Y)", worst["tensorial"])
    out.add("covform.probe_vs_direct", "basis-probed nabla_X w agrees with direct evaluation", worst["probe"])
    out.add("covform.function_direction", "nabla_(fX) w = f nabla_X w", worst["fX"])
    out.add("covform.function_scaling", "nabla_X(fw) = f nabla_X w + i_[X,f] w", worst["fw"])
    out.add("covform.top_degree", "nabla_X w = L_X w for deg w = k-1", worst["p925"])
    out.add("covform.upper_induced_interior",
            "nabla_X(i_W w) = (-1)^(j(k-1)) (i_W nabla_X w + i_(nabla_X W) w), upper induced", worst["upper"])
    out.add("covform.wedge_split",
            "nabla_(X^Y) w = (-1)^l i_Y nabla_X w + (-1)^(k(l-1)) i_X nabla_Y w, torsion-free induced",
            worst["split"])
    return out.checks


# ---------------------------------------------------------------------------
# higher connection axioms and classification

def _axiom_residuals(conn: HigherConnection, ctx: SuiteContext, rng, count: int) -> dict:
    n, plan, chart = ctx.n, ctx.plan, ctx.chart
    worst = dict.fromkeys(["degree", "lower_linear", "upper_additive", "function_arg", "leibniz",
                           "function_dir", "interior_form"], 0.0)
    for i in range(count):
        k = int(rng.integers(0, n + 1))
        l = int(rng.integers(0, n + 1))
        X, X2 = _mvf(ctx, rng, k, i), random_mvf(chart, k, rng)
        Y, Y2 = _mvf(ctx, rng, l, i + 1), random_mvf(chart, l, rng)
        f = random_polynomial(chart, rng)
        F = MultiVectorField.scalar_field(f)
        v = higher_cov(conn, X, Y)
        worst["degree"] = max(worst["degree"], 0.0 if v.degree == k + l - 1 else 1.0)
        worst["lower_linear"] = max(worst["lower_linear"], _res(
            higher_cov(conn, X * f + X2, Y), v * f + higher_cov(conn, X2, Y), plan))
        worst["upper_additive"] = max(worst["upper_additive"], _res(
            higher_cov(conn, X, Y + Y2), v + higher_cov(conn, X, Y2), plan))
        worst["function_arg"] = max(worst["function_arg"], _res(higher_cov(conn, X, F), snb(X, F), plan))
        worst["leibniz"] = max(worst["leibniz"], _res(
            higher_cov(conn, X, Y * f), wedge(snb(X, F), Y) + v * f, plan))
        worst["function_dir"] = max(worst["function_dir"], _norm(higher_cov(conn, F, X), plan))
        if k >= 1:
            worst["interior_form"] = max(worst["interior_form"], _res(
                higher_cov(conn, X, Y * f), wedge(interior_fn(f, X), Y) * _sign(k - 1) + v * f, plan))
    return worst


def _induced_rule_residual(conn: HigherConnection, ctx: SuiteContext, rng) -> float:
    """Largest violation of the two wedge rules that characterize induced connections."""
    n, plan, chart = ctx.n, ctx.plan, ctx.chart
    worst = 0.0
    for k in range(1, n + 1):
        for l in range(1, n + 1 - k):
            for m in range(1, n + 2 - k - l):
                _, X = _decomposable(chart, rng, k)
                _, Y = _decomposable(chart, rng, l)
                _, Z = _decomposable(chart, rng, m)
                r1 = higher_cov(conn, wedge(X, Y), Z) - wedge(X, higher_cov(conn, Y, Z)) \
                    - wedge(Y, higher_cov(conn, X, Z)) * _sign(k * l)
                r2 = higher_cov(conn, X, wedge(Y, Z)) - wedge(higher_cov(conn, X, Y), Z) \
                    - wedge(Y, higher_cov(conn, X, Z)) * _sign((k - 1) * l)
                worst = max(worst, _norm(r1, plan), _norm(r2, plan))
    return worst


def axioms_suite(ctx: SuiteContext) -> list[Check]:
    out = _Collector("axioms", ctx)
    plan, chart = ctx.plan, ctx.chart
    rng = ctx.rng("axioms")
    conns = []
    if ctx.connection is not None:
        conns.append(ctx.connection)
    for i in range(ctx.random_connections):
        base = random_affine(chart, rng)
        twist = TwistFields.zero(chart) if i % 2 == 0 else random_twist(chart, rng)
        conns.append(HigherConnection(base, twist))
    if not conns:
        conns.append(HigherConnection.induced(AffineConnection.flat(chart)))
    per = max(ctx.instances // len(conns), 2)
    totals: dict = {}
    round_trip = 0.0
    zero_twist_rule, nonzero_twist_rule = 0.0, np.inf
    for conn in conns:
        for key, v in _axiom_residuals(conn, ctx, rng, per).items():
            totals[key] = max(totals.get(key, 0.0), v)
        base, twist = recover(lambda X, Y: higher_cov(conn, X, Y), chart)
        rt = max(base_residual(base, conn.base, plan), twist.residual(conn.twist, plan))
        round_trip = max(round_trip, rt)
        rule = _induced_rule_residual(conn, ctx, rng)
        if conn.twist.max_abs(plan) <= ctx.tol:
            zero_twist_rule = max(zero_twist_rule, rule)
        else:
            nonzero_twist_rule = min(nonzero_twist_rule, rule)
    out.add("axiom.1_degree", "deg nabla_X Y = k + l - 1", totals["degree"])
    out.add("axiom.2_lower_linear", "nabla_(fX+X') Y = f nabla_X Y + nabla_X' Y", totals["lower_linear"])
    out.add("axiom.3_upper_additive", "nabla_X (Y+Y') = nabla_X Y + nabla_X Y'", totals["upper_additive"])
    out.add("axiom.4_function_arg", "nabla_X f = [X,f]", totals["function_arg"])
    out.add("axiom.5_leibniz", "nabla_X (fY) = [X,f]^Y + f nabla_X Y", totals["leibniz"])
    out.add("axiom.6_function_dir", "nabla_f X = 0", totals["function_dir"])
    out.add("axiom.interior_leibniz", "nabla_X (fY) = (-1)^(k-1) i_f X ^ Y + f nabla_X Y", totals["interior_form"])
    out.add("classification.round_trip", "(base, twist) -> nabla -> probed (base, twist)", round_trip,
            tol=min(ctx.tol, 1e-10))
    out.add("classification.induced_zero_twist", "zero twist => both induced wedge rules hold",
            zero_twist_rule)
    if np.isfinite(nonzero_twist_rule):
        out.add("classification.induced_detects_twist", "nonzero twist => an induced wedge rule fails (min > tol)",
                nonzero_twist_rule, want_zero=False)
    base = conns[0].base
    if all(g.is_zero for row in base.gamma for r in row for g in r):
        out.add("classification.flat_constant", "flat base, constant Y: nabla_X Y = F(X, Y)",
                _flat_constant_residual(conns[0], ctx, rng))
    return out.result()


def base_residual(a: AffineConnection, b: AffineConnection, plan: SamplePlan) -> float:
    n = a.chart.dim
    worst = 0.0
    for k in range(n):
        for i in range(n):
            for j in range(n):
                worst = max(worst, _res(a.gamma[k][i][j], b.gamma[k][i][j], plan))
    return worst


def _flat_constant_residual(conn, ctx, rng) -> float:
    n, chart, plan = ctx.n, ctx.chart, ctx.plan
    worst = 0.0
    for k in range(1, n + 1):
        for l in range(1, n + 2 - k):
            X = random_mvf(chart, k, rng)
            Y = random_mvf(chart, l, rng, degree=0)
            worst = max(worst, _res(higher_cov(conn, X, Y), conn.twist.apply(X, Y), plan))
    return worst


# ---------------------------------------------------------------------------
# torsion

def twist_asymmetry(F: TwistFields, plan: SamplePlan) -> float:
    """max |F^{k,l}[K][I][J] - (-1)^{(k-1)(l-1)} F^{l,k}[K][J][I]|."""
    worst = 0.0
    keys = set()
    for (k, l), t in F.entries.items():
        for (K, I, J) in t:
            keys.add((k, l, K, I, J))
            keys.add((l, k, K, J, I))
    for k, l, K, I, J in keys:
        a = F.coefficient(k, l, K, I, J)
        b = F.coefficient(l, k, K, J, I) * _sign((k - 1) * (l - 1))
        worst = max(worst, _res(a, b, plan))
    return worst


def _rigidity_residual(chart: Chart, which: str, plan: SamplePlan) -> tuple[float, int]:
    """Torsion-free members of the upper (lower) induced family with flat base.

    Twist and torsion are linear in constant seed coefficients, so the
    torsion-free seeds form the null space of a constant matrix.  Returns the
    largest twist coefficient over a basis of that null space and its dimension.
    """
    n = chart.dim
    flat = AffineConnection.flat(chart)
    params = []
    for deg in range(2, n + 1):
        for K in multi_indices(n, deg):
            for A in multi_indices(n, deg):
                for j in range(n):
                    params.append((deg, (K, A, (j,)) if which == "upper" else (K, (j,), A)))
    p0 = plan.points[:1]
    builder = upper_induced_from if which == "upper" else lower_induced_from

    def twist_of(vec):
        seeds = {}
        for (deg, key), c in zip(params, vec):
            if c != 0.0:
                seeds.setdefault(deg, {})[key] = chart.const(float(c))
        return builder(flat, seeds)

    def torsion_vector(twist):
        conn = HigherConnection(flat, twist)
        vals = []
        for k in range(1, n + 1):
            for l in range(1, n + 2 - k):
                for I in multi_indices(n, k):
                    for J in multi_indices(n, l):
                        T = torsion(conn, MultiVectorField.basis(chart, I), MultiVectorField.basis(chart, J))
                        for K in multi_indices(n, k + l - 1):
                            vals.append(T[K].values(p0)[0])
        return np.array(vals)

    A = np.column_stack([torsion_vector(twist_of(np.eye(len(params))[c])) for c in range(len(params))])
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    null = vt[rank:]
    worst = 0.0
    for v in null:
        worst = max(worst, twist_of(v).max_abs(plan))
    return worst, len(null)


def torsion_suite(ctx: SuiteContext) -> list[Check]:
    out = _Collector("torsion", ctx)
    n, plan, chart = ctx.n, ctx.plan, ctx.chart
    rng = ctx.rng("torsion")
    conn = ctx.connection or HigherConnection.induced(AffineConnection.flat(chart))
    rep = torsion_report(conn, plan, tol=ctx.tol, rng=ctx.rng("torsion.family"))
    expect = ctx.expect.get("torsion_free")
    out.add("torsion.spec_connection", "T(d_I, d_J) = 0 on all basis pairs", rep.max_residual,
            want_zero=None if expect is None else bool(expect))
    expect_atf = ctx.expect.get("almost_torsion_free")
    out.add("torsion.spec_almost", "T = 0 on vector pairs and on pairs with X^Y = 0",
            max(rep.one_vector_residual, rep.overlap_residual or 0.0),
            want_zero=None if expect_atf is None else bool(expect_atf))
    predicted = conn.base.is_symmetric(plan, ctx.tol) and twist_asymmetry(conn.twist, plan) <= ctx.tol
    out.add("torsion.spec_criterion", "torsion-free <=> symmetric base and symmetric twist",
            0.0 if predicted == rep.torsion_free else 1.0, tol=0.5)
    # torsion-free base, zero twist
    worst = 0.0
    for base in (AffineConnection.flat(chart), random_affine(chart, rng, symmetric=True)):
        ind = HigherConnection.induced(base)
        for _ in range(max(ctx.instances // 10, 2)):
            k, l = int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1))
            worst = max(worst, _norm(torsion(ind, random_mvf(chart, k, rng), random_mvf(chart, l, rng)), plan))
    out.add("torsion.induced_vanishes", "induced from a torsion-free base => T = 0", worst)
    # antisymmetry and function linearity on generic connections
    anti = lin = 0.0
    generic = HigherConnection(random_affine(chart, rng), random_twist(chart, rng))
    for _ in range(max(ctx.instances // 5, 2)):
        k, l = int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1))
        X, Y = random_mvf(chart, k, rng), random_mvf(chart, l, rng)
        f = random_polynomial(chart, rng)
        T = torsion(generic, X, Y)
        anti = max(anti, _norm(T + torsion(generic, Y, X) * _sign((k - 1) * (l - 1)), plan))
        lin = max(lin, _res(torsion(generic, X * f, Y), T * f, plan))
    out.add("torsion.antisymmetry", "T(X,Y) = -(-1)^((k-1)(l-1)) T(Y,X)", anti)
    out.add("torsion.function_linear", "T(fX,Y) = f T(X,Y)", lin)
    # criterion in both directions on randomized data
    free_max, detect_min = 0.0, np.inf
    for i in range(6):
        sym_base = i % 3 != 2
        base = random_affine(chart, rng, symmetric=sym_base)
        F = random_twist(chart, rng)
        twist = symmetrize_twist(F) if i % 2 == 0 else F
        c = HigherConnection(base, twist)
        r = torsion_report(c, plan, tol=ctx.tol, almost=False).max_residual
        if sym_base and twist_asymmetry(twist, plan) <= ctx.tol:
            free_max = max(free_max, r)
        else:
            detect_min = min(detect_min, r)
    out.add("torsion.criterion_sufficient", "symmetric base and symmetric twist => T = 0", free_max)
    out.add("torsion.criterion_necessary", "asymmetric base or twist => T != 0 (min > tol)", detect_min,
            want_zero=False)
    # symmetrized twist over a Levi-Civita base
    g = random_metric(chart, rng)
    lc = HigherConnection(bl.levi_civita(g), symmetrize_twist(random_twist(chart, rng)))
    out.add("torsion.symmetrized_levi_civita", "Levi-Civita base + symmetrized twist => T = 0",
            torsion_report(lc, plan, tol=ctx.tol, almost=False).max_residual)
    for which in ("upper", "lower"):
        res, dim = _rigidity_residual(chart, which, plan)
        out.add(f"torsion.{which}_induced_rigid",
                f"torsion-free {which}-induced connection has zero twist (null dim {dim})", res,
                tol=min(ctx.tol, 1e-10))
    return out.result()


# ---------------------------------------------------------------------------
# associative bilinear forms

def _random_eta(chart, rng, closed=False):
    n = chart.dim
    forms = {}
    for t in range(n + 1):
        if closed:
            if t == 0:
                forms[0] = DifferentialForm(chart, 0, {(): chart.const(float(rng.uniform(-1, 1)))})
            else:
                forms[t] = d(random_form(chart, t - 1, rng))
        else:
            forms[t] = random_form(chart, t, rng)
    return bl.BilinearFormEta(chart, forms)


def eta_suite(ctx: SuiteContext) -> list[Check]:
    out = _Collector("eta", ctx)
    n, plan, chart = ctx.n, ctx.plan, ctx.chart
    rng = ctx.rng("eta")
    etas = ([ctx.eta] if ctx.eta is not None else []) + [_random_eta(chart, rng) for _ in range(3)]
    rt = assoc = symm = 0.0
    for eta in etas:
        back = bl.forms_from_eta(eta, chart)
        rt = max([rt] + [back[t].residual(eta.forms[t], plan.points) for t in range(n + 1)])
        for _ in range(max(ctx.instances // 10, 3)):
            k, l = int(rng.integers(0, n + 1)), int(rng.integers(0, n + 1))
            m = int(rng.integers(0, n + 1))
            X, Y, Z = random_mvf(chart, k, rng), random_mvf(chart, l, rng), random_mvf(chart, m, rng)
            assoc = max(assoc, _res(bl.eta_eval(eta, wedge(X, Y), Z), bl.eta_eval(eta, X, wedge(Y, Z)), plan))
            symm = max(symm, _res(bl.eta_eval(eta, X, Y), bl.eta_eval(eta, Y, X) * _sign(k * l), plan))
    out.add("eta.round_trip", "forms -> eta -> probed forms", rt, tol=min(ctx.tol, 1e-10))
    out.add("eta.associativity", "eta(X^Y, Z) = eta(X, Y^Z)", assoc)
    out.add("eta.graded_symmetry", "eta(X,Y) = (-1)^(kl) eta(Y,X)", symm)
    out.add("eta.nondegenerate_gram", "top form nonzero <=> full-rank Gram matrix (disagreements)",
            gram_disagreements(ctx.eta or _gram_test_eta(chart, rng), gram_points(plan)), tol=0.5)
    closed = _random_eta(chart, rng, closed=True)
    res, spread = _closed_residual(closed, ctx, rng)
    out.add("eta.closed_identity", "sum_i (-1)^i X_i eta(X[i],1) = sum_(i<j) (-1)^(i+j) eta([X_i,X_j], X[i,j])",
            res)
    out.add("eta.unit_constant", "eta(1,1) is constant for closed collections", spread)
    if ctx.eta is not None:
        try:
            r, _ = _closed_residual(ctx.eta, ctx, rng)
            out.add("eta.spec_closed_identity", "closedness identity on the spec file eta", r)
        except HiconnError:
            pass
        if ctx.connection is not None:
            rep = bl.is_parallel(ctx.connection, ctx.eta, plan, ctx.tol)
            expect = ctx.expect.get("parallel")
            out.add("eta.spec_parallel", "(nabla~_X w)(Y) = w(F(X,Y)) on basis pairs", rep.max_residual,
                    want_zero=None if expect is None else bool(expect))
            fresh = SamplePlan.uniform(chart, len(plan.points), seed=(ctx.seed + 1))
            out.add("eta.spec_parallel_fresh_plan", "parallel residual on an independent plan",
                    bl.is_parallel(ctx.connection, ctx.eta, fresh, ctx.tol).max_residual,
                    want_zero=None if expect is None else bool(expect))
            expect_atf = ctx.expect.get("almost_torsion_free")
            rep_t = torsion_report(ctx.connection, plan, tol=ctx.tol, rng=ctx.rng("eta.family"))
            out.add("eta.spec_almost_torsion_free", "T = 0 on vector pairs and on pairs with X^Y = 0",
                    max(rep_t.one_vector_residual, rep_t.overlap_residual or 0.0),
                    want_zero=None if expect_atf is None else bool(expect_atf))
    # flip symmetry for torsion-free base on overlapping basis pairs
    base = ctx.connection.base if ctx.connection is not None else random_affine(chart, rng, symmetric=True)
    if base.is_symmetric(plan, ctx.tol):
        out.add("eta.flip_overlap", "X^Y = 0 => (nabla~_X w)(Y) = (-1)^((k-1)(l-1)) (nabla~_Y w)(X)",
                _flip_residual(base, ctx, rng))
    return out.result()


def gram_points(plan: SamplePlan) -> np.ndarray:
    """Plan points plus copies with x0 = 0, where the test forms degenerate."""
    zeroed = plan.points.copy()
    zeroed[:, 0] = 0.0
    return np.vstack([plan.points, zeroed])


def _gram_test_eta(chart, rng):
    n = chart.dim
    eta = _random_eta(chart, rng)
    forms = list(eta.forms)
    forms[n] = DifferentialForm(chart, n, {tuple(range(n)): chart.coord(0) * (random_polynomial(chart, rng, 0) + 2.0)})
    return bl.BilinearFormEta(chart, forms)


def gram_disagreements(eta, points) -> int:
    full = 2 ** eta.chart.dim
    return sum(bl.nondegenerate_at(eta, p) != (bl.gram_rank(eta, p) == full) for p in points)


def _closed_residual(eta, ctx, rng):
    n, chart, plan = ctx.n, ctx.chart, ctx.plan
    worst, spread = 0.0, 0.0
    for k in range(n):
        Xs = [random_mvf(chart, 1, rng, degree=1) for _ in range(k + 1)]
        r = bl.closed_identity_check(eta, Xs, plan, tol=ctx.tol)
        worst, spread = max(worst, r.residual), max(spread, r.scalar_variation)
    return worst, spread


def _flip_residual(base, ctx, rng) -> float:
    n, chart, plan = ctx.n, ctx.chart, ctx.plan
    ind = HigherConnection.induced(base)
    worst = 0.0
    for k in range(1, n + 1):
        for l in range(1, n + 2 - k):
            w = random_form(chart, k + l - 1, rng)
            for I in multi_indices(n, k):
                for J in multi_indices(n, l):
                    if not set(I) & set(J):
                        continue
                    X, Y = MultiVectorField.basis(chart, I), MultiVectorField.basis(chart, J)
                    worst = max(worst, _res(cov_form_value(ind, X, w, Y),
                                            cov_form_value(ind, Y, w, X) * _sign((k - 1) * (l - 1)), plan))
    return worst


# ---------------------------------------------------------------------------
# parallel construction

def construction_checks(eta, ctx: SuiteContext, metric=None, base=None, suite="construct-parallel") -> list[Check]:
    out = _Collector(suite, ctx)
    chart, plan = ctx.chart, ctx.plan
    conn = bl.construct_parallel(eta, metric, base, plan)
    g = metric or bl.Metric.identity(chart)
    e_res = 0.0
    for t in range(2, chart.dim + 1):
        w = eta.omega(t)
        if w.max_abs(plan.points) > bl.VANISH_THRESHOLD:
            E = bl.e_field(w, g, plan)
            e_res = max(e_res, _res(pair(w, E), chart.const(1.0), plan))
    out.add("construct.e_identity", "w(E) = 1 for each nonzero w^(t)", e_res)
    out.add("construct.parallel", "(nabla~_X w)(Y) = w(F(X,Y)) on basis pairs",
            bl.is_parallel(conn, eta, plan, ctx.tol).max_residual)
    fresh = SamplePlan.uniform(chart, len(plan.points), seed=ctx.seed + 1)
    out.add("construct.parallel_fresh_plan", "parallel residual on an independent plan",
            bl.is_parallel(conn, eta, fresh, ctx.tol).max_residual)
    rep = torsion_report(conn, plan, tol=ctx.tol, rng=ctx.rng("construct.family"))
    out.add("construct.vector_torsion", "T(X,Y) = 0 for vector fields", rep.one_vector_residual)
    out.add("construct.overlap_torsion", "T(X,Y) = 0 whenever X^Y = 0 (test family)", rep.overlap_residual)
    rng = ctx.rng("construct.nabla_eta")
    worst = 0.0
    n = chart.dim
    for k in range(1, n + 1):
        for l in range(0, n + 1):
            for m in range(0, n + 2 - k - l):
                if l + m == 0 or k + l + m > n + 1:
                    continue
                X, Y, Z = random_mvf(chart, k, rng), random_mvf(chart, l, rng), random_mvf(chart, m, rng)
                worst = max(worst, _norm(bl.nabla_eta(conn, eta, X, Y, Z), plan))
    out.add("construct.nabla_eta", "(nabla_X eta)(Y, Z) = 0 for random X, Y, Z with l+m > 0", worst)
    return out.checks


def construct_suite(ctx: SuiteContext) -> list[Check]:
    if ctx.eta is None:
        return [Check("construct-parallel", "construct.skipped", "no eta in spec", 0.0, ctx.tol, "INFO")]
    try:
        checks = construction_checks(ctx.eta, ctx, ctx.metric, ctx.base)
    except (NotInBCircle, VanishingNorm, BaseNotTorsionFree) as exc:
        return [Check("construct-parallel", "construct.preconditions", f"{type(exc).__name__}: {exc}",
                      float("inf"), ctx.tol, "FAIL")]
    return sorted(checks, key=lambda c: c.id)


SUITES: dict[str, Callable[[SuiteContext], list[Check]]] = {
    "axioms": axioms_suite,
    "snb": snb_suite,
    "torsion": torsion_suite,
    "forms": forms_suite,
    "eta": eta_suite,
    "construct-parallel": construct_suite,
}


def run_suite(name: str, ctx: SuiteContext) -> list[Check]:
    if name == "all":
        checks = []
        for key in SUITES:
            checks.extend(SUITES[key](ctx))
        return checks
    return SUITES[name](ctx)
