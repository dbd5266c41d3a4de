"""Associative bilinear forms on the exterior bundle and parallel higher connections.

An associative form η is stored as its collection of differential forms
ω^(0), ..., ω^(n), with η(x, y) = ω^(k+l)(x ^ y).  The metric helpers supply
the index raising needed to build a higher connection that makes η parallel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .connection import (
    AffineConnection,
    HigherConnection,
    TwistFields,
    cov_form,
    cov_form_value,
)
from .errors import (
    BaseNotTorsionFree,
    ChartMismatch,
    DegreeError,
    DegreeMismatch,
    DivisionByZero,
    NotClosed,
    NotInBCircle,
    VanishingNorm,
)
from .exterior import (
    DifferentialForm,
    MultiVectorField,
    _Accumulator,
    d,
    directional,
    interior_form,
    pair,
    snb,
    wedge,
    wedge_all,
)
from .multilinear import KVector, multi_indices, numeric_rank, pair_covector, wedge_point
from .scalar import Chart, SamplePlan, ScalarField, _add, _mul, _neg, parse

MAX_METRIC_DIM = 6
VANISH_THRESHOLD = 1e-10


def _as_field(chart: Chart, value) -> ScalarField:
    if isinstance(value, ScalarField):
        if value.chart != chart:
            raise ChartMismatch(f"{value.chart} vs {chart}")
        return value
    if isinstance(value, str):
        return parse(value, chart)
    return chart.const(float(value))


def _symbolic_det(entry, rows: tuple, cols: tuple, memo: dict):
    """Laplace expansion along the first row; ``entry(i, j)`` returns a node."""
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if not rows:
        out = _mul([])
    elif len(rows) == 1:
        out = entry(rows[0], cols[0])
    else:
        terms = []
        r0, rest = rows[0], rows[1:]
        for c, col in enumerate(cols):
            a = entry(r0, col)
            minor = _symbolic_det(entry, rest, cols[:c] + cols[c + 1:], memo)
            t = _mul([a, minor])
            terms.append(_neg(t) if c % 2 else t)
        out = _add(terms)
    memo[key] = out
    return out


@dataclass(frozen=True, eq=False)
class Metric:
    """A symmetric metric g_ij with a closed-form inverse (adjugate over determinant)."""

    chart: Chart
    g: tuple

    def __post_init__(self):
        n = self.chart.dim
        if n > MAX_METRIC_DIM:
            raise DegreeMismatch(f"symbolic metric inverse is limited to n <= {MAX_METRIC_DIM}")
        if len(self.g) != n or any(len(row) != n for row in self.g):
            raise DegreeMismatch(f"metric must be a {n}x{n} matrix")
        g = tuple(tuple(_as_field(self.chart, v) for v in row) for row in self.g)
        for i in range(n):
            for j in range(i + 1, n):
                if str(g[i][j]) != str(g[j][i]):
                    raise ValueError(f"metric is not symmetric at ({i}, {j}): {g[i][j]} vs {g[j][i]}")
        object.__setattr__(self, "g", g)

    @classmethod
    def identity(cls, chart: Chart) -> "Metric":
        n = chart.dim
        return cls(chart, [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)])

    @cached_property
    def _det_memo(self) -> dict:
        return {}

    @cached_property
    def det(self) -> ScalarField:
        n = self.chart.dim
        idx = tuple(range(n))
        return ScalarField(self.chart, _symbolic_det(lambda i, j: self.g[i][j].node, idx, idx, self._det_memo))

    @cached_property
    def inverse(self) -> tuple:
        """ḡ^{ij} = (-1)^{i+j} M_ji / det g."""
        n = self.chart.dim
        idx = tuple(range(n))
        inv_det = self.det.recip()
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                rows = tuple(r for r in idx if r != j)
                cols = tuple(c for c in idx if c != i)
                minor = ScalarField(self.chart, _symbolic_det(lambda a, b: self.g[a][b].node, rows, cols,
                                                              self._det_memo))
                cof = minor if (i + j) % 2 == 0 else -minor
                row.append(cof * inv_det)
            out.append(tuple(row))
        return tuple(out)

    @cached_property
    def _inv_memo(self) -> dict:
        return {}

    def inverse_minor(self, I: tuple, J: tuple) -> ScalarField:
        """det(ḡ^{i_a j_b})."""
        inv = self.inverse
        node = _symbolic_det(lambda a, b: inv[a][b].node, tuple(I), tuple(J), self._inv_memo)
        return ScalarField(self.chart, node)

    def check_nonsingular(self, plan: SamplePlan, threshold: float = 1e-12) -> None:
        vals = self.det.values(plan.points)
        bad = np.flatnonzero(np.abs(vals) <= threshold)
        if bad.size:
            p = plan.points[bad[0]]
            raise DivisionByZero(f"metric is singular at {tuple(p)}", point=tuple(p))


def levi_civita(metric: Metric) -> AffineConnection:
    """Γ^k_ij = 1/2 Σ_m ḡ^{km} (∂_i g_mj + ∂_j g_mi - ∂_m g_ij)."""
    chart = metric.chart
    n = chart.dim
    g, inv = metric.g, metric.inverse
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if j < i:
                    gamma[k][i][j] = gamma[k][j][i]
                    continue
                terms = []
                for m in range(n):
                    bracket = g[m][j].partial(i) + g[m][i].partial(j) - g[i][j].partial(m)
                    if bracket.is_zero or inv[k][m].is_zero:
                        continue
                    terms.append(inv[k][m] * bracket)
                gamma[k][i][j] = ScalarField.sum(chart, terms) * 0.5
    return AffineConnection(chart, gamma)


def form_inner(omega: DifferentialForm, phi: DifferentialForm, g: Metric) -> ScalarField:
    """⟨ω, φ⟩ = Σ_{I,J} ω_I φ_J det(ḡ^{i_a j_b})."""
    if omega.degree != phi.degree:
        raise DegreeMismatch(f"cannot pair forms of degrees {omega.degree} and {phi.degree}")
    if omega.chart != g.chart or phi.chart != g.chart:
        raise ChartMismatch("form_inner arguments live on different charts")
    if omega.degree == 0:
        return omega.scalar * phi.scalar
    nodes = []
    for I, a in omega.coeffs.items():
        for J, b in phi.coeffs.items():
            m = g.inverse_minor(I, J)
            if not m.is_zero:
                nodes.append(_mul([a.node, b.node, m.node]))
    return ScalarField(g.chart, _add(nodes))


def sharp(omega: DifferentialForm, g: Metric) -> MultiVectorField:
    """Index raising: (ω^♯)^J = Σ_I det(ḡ^{j_a i_b}) ω_I."""
    if omega.degree < 1:
        raise DegreeError("sharp needs a form of degree >= 1")
    acc = _Accumulator(g.chart)
    for J in multi_indices(g.chart.dim, omega.degree):
        for I, w in omega.coeffs.items():
            m = g.inverse_minor(J, I)
            if not m.is_zero:
                acc.add(J, 1, m, w)
    return MultiVectorField(g.chart, omega.degree, acc.coeffs(), check=False)


def e_field(omega: DifferentialForm, g: Metric, plan: SamplePlan | None = None) -> MultiVectorField:
    """E = ω^♯ / ⟨ω, ω⟩, so that ω(E) = 1 wherever ω does not vanish."""
    norm = form_inner(omega, omega, g)
    if plan is not None:
        vals = norm.values(plan.points)
        bad = np.flatnonzero(np.abs(vals) <= VANISH_THRESHOLD)
        if bad.size:
            p = tuple(plan.points[bad[0]])
            raise VanishingNorm(f"⟨ω, ω⟩ vanishes at {p}", point=p)
    if norm.is_zero:
        raise VanishingNorm("⟨ω, ω⟩ is identically zero")
    return sharp(omega, g) * norm.recip()


# ---------------------------------------------------------------------------
# η

class BilinearFormEta:
    """η on the exterior bundle, stored as ω^(0), ..., ω^(n)."""

    def __init__(self, chart: Chart, forms: Sequence | dict | None = None):
        self.chart = chart
        n = chart.dim
        items = forms.items() if isinstance(forms, dict) else enumerate(forms or [])
        out = [DifferentialForm.zero(chart, t) for t in range(n + 1)]
        for t, w in items:
            t = int(t)
            if not 0 <= t <= n:
                raise DegreeMismatch(f"form degree {t} out of range for n={n}")
            if isinstance(w, (ScalarField, int, float, str)) and t == 0:
                w = DifferentialForm(chart, 0, {(): w})
            if not isinstance(w, DifferentialForm):
                raise TypeError(f"expected a DifferentialForm for degree {t}")
            if w.chart != chart:
                raise ChartMismatch(f"{w.chart} vs {chart}")
            if w.degree != t:
                raise DegreeMismatch(f"slot {t} holds a form of degree {w.degree}")
            out[t] = w
        self.forms = tuple(out)

    def omega(self, t: int) -> DifferentialForm:
        if 0 <= t <= self.chart.dim:
            return self.forms[t]
        return DifferentialForm.zero(self.chart, t)

    @property
    def is_zero(self) -> bool:
        return all(w.is_zero for w in self.forms)

    def __call__(self, X: MultiVectorField, Y: MultiVectorField) -> ScalarField:
        return eta_eval(self, X, Y)


def eta_eval(eta: BilinearFormEta, X: MultiVectorField, Y: MultiVectorField) -> ScalarField:
    """η(X, Y) = ω^(k+l)(X ^ Y); zero when k + l exceeds the dimension."""
    if X.chart != eta.chart or Y.chart != eta.chart:
        raise ChartMismatch("eta_eval arguments live on different charts")
    t = X.degree + Y.degree
    if t > eta.chart.dim or X.degree < 0 or Y.degree < 0:
        return eta.chart.const(0.0)
    return pair(eta.omega(t), wedge(X, Y))


def eta_from_forms(chart: Chart, forms: Sequence) -> BilinearFormEta:
    return BilinearFormEta(chart, forms)


def forms_from_eta(eta_like, chart: Chart) -> list[DifferentialForm]:
    """Recover ω^(k) by probing η(∂_I, 1); ``eta_like`` is any callable (X, Y) -> ScalarField."""
    one = MultiVectorField.scalar_field(chart.const(1.0))
    out = []
    for k in range(chart.dim + 1):
        coeffs = {}
        for I in multi_indices(chart.dim, k):
            v = eta_like(MultiVectorField.basis(chart, I), one)
            if not v.is_zero:
                coeffs[I] = v
        out.append(DifferentialForm(chart, k, coeffs, check=False))
    return out


def _forms_at(eta: BilinearFormEta, p) -> list[KVector]:
    return [w.at(p) for w in eta.forms]


def gram_matrix(eta: BilinearFormEta, p) -> np.ndarray:
    """[η(e_I, e_J)](p) over the full basis of the exterior algebra at p (size 2^n)."""
    n = eta.chart.dim
    forms = _forms_at(eta, p)
    basis = [KVector.basis(n, I) for k in range(n + 1) for I in multi_indices(n, k)]
    G = np.zeros((len(basis), len(basis)))
    for a, x in enumerate(basis):
        for b, y in enumerate(basis):
            t = x.k + y.k
            if t <= n:
                G[a, b] = pair_covector(forms[t], wedge_point(x, y))
    return G


def gram_rank(eta: BilinearFormEta, p) -> int:
    return numeric_rank(gram_matrix(eta, p))


def nondegenerate_at(eta: BilinearFormEta, p) -> bool:
    """True iff ω^(n)(p) is nonzero, i.e. the top form is a volume form at p."""
    n = eta.chart.dim
    top = eta.omega(n)[tuple(range(n))]
    return abs(top(p)) > VANISH_THRESHOLD


@dataclass
class ClosedIdentityResult:
    residual: float
    scalar_variation: float


def closed_identity_check(eta: BilinearFormEta, fields: Sequence[MultiVectorField], plan: SamplePlan,
                          tol: float = 1e-8) -> ClosedIdentityResult:
    """Residual of Σ_i (-1)^i X_i(η(X[i], 1)) = Σ_{i<j} (-1)^{i+j} η([X_i, X_j], X[i, j]).

    Also returns the spread of η(1, 1) over the plan, which must vanish.
    """
    for t, w in enumerate(eta.forms):
        if t < eta.chart.dim:
            r = d(w).max_abs(plan.points)
            if r > tol:
                raise NotClosed(f"d ω^({t}) does not vanish (max {r:.3e})")
    chart = eta.chart
    one = MultiVectorField.scalar_field(chart.const(1.0))
    Xs = list(fields)
    for X in Xs:
        if X.degree != 1:
            raise DegreeError("closed_identity_check takes vector fields")
    m = len(Xs)

    def wedge_except(skip):
        rest = [X for i, X in enumerate(Xs) if i not in skip]
        return wedge_all(chart, rest, MultiVectorField) if rest else one

    lhs = []
    for i in range(m):
        v = directional(Xs[i], eta_eval(eta, wedge_except({i}), one))
        lhs.append(v if (i + 1) % 2 == 0 else -v)
    rhs = []
    for i in range(m):
        for j in range(i + 1, m):
            v = eta_eval(eta, snb(Xs[i], Xs[j]), wedge_except({i, j}))
            rhs.append(v if (i + j) % 2 == 0 else -v)
    diff = ScalarField.sum(chart, lhs) - ScalarField.sum(chart, rhs)
    residual = float(np.max(np.abs(diff.values(plan.points))))
    w0 = eta.omega(0).scalar.values(plan.points)
    return ClosedIdentityResult(residual, float(np.max(w0) - np.min(w0)))


def nabla_eta(conn: HigherConnection, eta: BilinearFormEta, X: MultiVectorField, Y: MultiVectorField,
              Z: MultiVectorField) -> ScalarField:
    """(∇_X η)(Y, Z) = (∇_X ω^(t))(Y ^ Z) with t = k + l + m - 1."""
    n = eta.chart.dim
    k, l, m = X.degree, Y.degree, Z.degree
    if k + l + m > n + 1:
        raise DegreeError(f"degrees {k}+{l}+{m} exceed n+1 = {n + 1}")
    t = k + l + m - 1
    if t < 0 or k == 0:
        return eta.chart.const(0.0)
    return pair(cov_form(conn, X, eta.omega(t)), wedge(Y, Z))


@dataclass
class ParallelReport:
    residuals: dict
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def parallel(self) -> bool:
        return self.max_residual <= self.tol


def is_parallel(conn: HigherConnection, eta: BilinearFormEta, plan: SamplePlan, tol: float = 1e-8) -> ParallelReport:
    """Residuals of (∇̃_{∂_I} ω^(t))(∂_J) = ω^(t)(F^{k,l}(∂_I, ∂_J)) on basis pairs, t = k+l-1."""
    chart = eta.chart
    n = chart.dim
    induced = HigherConnection.induced(conn.base)
    residuals = {}
    for k in range(1, n + 1):
        for l in range(1, n + 2 - k):
            omega = eta.omega(k + l - 1)
            worst = 0.0
            for I in multi_indices(n, k):
                X = MultiVectorField.basis(chart, I)
                for J in multi_indices(n, l):
                    Y = MultiVectorField.basis(chart, J)
                    lhs = cov_form_value(induced, X, omega, Y)
                    rhs = pair(omega, conn.twist.apply(X, Y))
                    diff = lhs - rhs
                    if not diff.is_zero:
                        worst = max(worst, float(np.max(np.abs(diff.values(plan.points)))))
            residuals[(k, l)] = worst
    return ParallelReport(residuals, tol)


@dataclass
class EtaClassification:
    in_B_circle: bool
    in_B_plectic: bool
    nonzero: dict = field(default_factory=dict)
    nonvanishing: dict = field(default_factory=dict)
    closed_residual: dict = field(default_factory=dict)
    nondegenerate: dict = field(default_factory=dict)


def _contraction_rank_ok(w: DifferentialForm, plan: SamplePlan) -> bool:
    """v ↦ i_v ω has trivial kernel at every plan point."""
    chart = w.chart
    n = chart.dim
    cols = [interior_form(MultiVectorField.basis(chart, (i,)), w) for i in range(n)]
    rows = multi_indices(n, w.degree - 1)
    for p in plan.points:
        A = np.array([[c[J](p) for c in cols] for J in rows]).reshape(len(rows), n)
        if numeric_rank(A) < n:
            return False
    return True


def classify_eta(eta: BilinearFormEta, plan: SamplePlan) -> EtaClassification:
    """Membership in B° and in the multisymplectic subclass, decided on the plan."""
    n = eta.chart.dim
    out = EtaClassification(False, False)
    for t, w in enumerate(eta.forms):
        vals = np.array([v for v in w.values(plan.points).values()]) if w.coeffs else np.zeros((1, len(plan.points)))
        per_point = np.max(np.abs(vals), axis=0)
        out.nonzero[t] = bool(np.max(per_point) > VANISH_THRESHOLD)
        out.nonvanishing[t] = bool(np.min(per_point) > VANISH_THRESHOLD)
        if t < n:
            out.closed_residual[t] = d(w).max_abs(plan.points)
    circle = not out.nonzero.get(1, False)
    for t in range(2, n + 1):
        if out.nonzero[t] and not out.nonvanishing[t]:
            circle = False
    out.in_B_circle = circle
    plectic = circle
    if plectic:
        for t in range(2, n + 1):
            if not out.nonzero[t]:
                continue
            closed = out.closed_residual.get(t, 0.0) <= 1e-8
            nondeg = _contraction_rank_ok(eta.forms[t], plan)
            out.nondegenerate[t] = nondeg
            if not (closed and nondeg):
                plectic = False
    out.in_B_plectic = plectic
    return out


def construct_parallel(eta: BilinearFormEta, g: Metric | None = None, base: AffineConnection | None = None,
                       plan: SamplePlan | None = None) -> HigherConnection:
    """An almost torsion-free higher connection with ∇η = 0.

    The twist is F^{k,l}(X, Y) = [(∇̃_X ω^(t))(Y)] E^(t) for nonzero ω^(t),
    t = k + l - 1, and zero otherwise.  ``g`` defaults to the identity metric
    and ``base`` to its Levi-Civita connection.
    """
    chart = eta.chart
    n = chart.dim
    plan = plan or SamplePlan.uniform(chart)
    g = g or Metric.identity(chart)
    if g.chart != chart:
        raise ChartMismatch("metric lives on a different chart")
    g.check_nonsingular(plan)
    cls = classify_eta(eta, plan)
    if not cls.in_B_circle:
        bad = [t for t in range(2, n + 1) if cls.nonzero[t] and not cls.nonvanishing[t]]
        reason = "ω^(1) is nonzero" if cls.nonzero.get(1) else f"ω^({bad[0]}) vanishes somewhere on the plan"
        raise NotInBCircle(reason)
    base = base or levi_civita(g)
    if not base.is_symmetric(plan):
        raise BaseNotTorsionFree(f"base connection has torsion (max {base.torsion_residual(plan):.3e})")
    induced = HigherConnection.induced(base)
    entries = {}
    for t in range(2, n + 1):
        if not cls.nonzero[t]:
            continue
        omega = eta.omega(t)
        E = e_field(omega, g, plan)
        for k in range(1, t + 1):
            l = t + 1 - k
            tensor = {}
            for I in multi_indices(n, k):
                X = MultiVectorField.basis(chart, I)
                for J in multi_indices(n, l):
                    c = cov_form_value(induced, X, omega, MultiVectorField.basis(chart, J))
                    if c.is_zero:
                        continue
                    for K, e in E.coeffs.items():
                        tensor[(K, I, J)] = c * e
            entries[(k, l)] = tensor
    return HigherConnection(base, TwistFields(chart, entries))
