"""Higher affine connections as a base affine connection plus twist tensors.

A higher connection acts on multivector fields of all degrees.  It is stored
as the pair (base, twist): the induced extension of an ordinary affine
connection ``base`` plus tensorial corrections ``F^{k,l}(X, Y)`` for k, l >= 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ChartMismatch, DegreeError, DegreeMismatch, InvalidSeed
from .exterior import (
    DifferentialForm,
    GradedMVF,
    MultiVectorField,
    _Accumulator,
    directional,
    interior_form,
    lie,
    pair,
    snb,
    wedge,
)
from .multilinear import check_multi_index, merge_sign, multi_indices, remove_at, sort_sign
from .scalar import Chart, SamplePlan, ScalarField, parse

Tensor = dict  # (K, I, J) -> ScalarField


def _as_field(chart: Chart, value) -> ScalarField:
    if isinstance(value, ScalarField):
        if value.chart != chart:
            raise ChartMismatch(f"{value.chart} vs {chart}")
        return value
    if isinstance(value, str):
        return parse(value, chart)
    return chart.const(float(value))


def _sign(e: int) -> int:
    return -1 if e % 2 else 1


@dataclass(frozen=True, eq=False)
class AffineConnection:
    """Christoffel symbols with ∇_{∂_i} ∂_j = Σ_k gamma[k][i][j] ∂_k."""

    chart: Chart
    gamma: tuple

    def __post_init__(self):
        n = self.chart.dim
        g = self.gamma
        if len(g) != n or any(len(row) != n or any(len(r) != n for r in row) for row in g):
            raise DegreeMismatch(f"Christoffel array must have shape ({n}, {n}, {n})")
        frozen = tuple(
            tuple(tuple(_as_field(self.chart, v) for v in r) for r in row) for row in g
        )
        object.__setattr__(self, "gamma", frozen)

    @classmethod
    def flat(cls, chart: Chart) -> "AffineConnection":
        n = chart.dim
        zero = chart.const(0.0)
        return cls(chart, [[[zero] * n for _ in range(n)] for _ in range(n)])

    @classmethod
    def from_entries(cls, chart: Chart, entries: Mapping) -> "AffineConnection":
        """Build from a sparse map (k, i, j) -> coefficient; missing entries are 0."""
        n = chart.dim
        g = [[[0.0] * n for _ in range(n)] for _ in range(n)]
        for (k, i, j), v in entries.items():
            for a in (k, i, j):
                if not 0 <= a < n:
                    raise ValueError(f"Christoffel index {(k, i, j)} out of range for n={n}")
            g[k][i][j] = v
        return cls(chart, g)

    def entries(self) -> dict:
        n = self.chart.dim
        return {
            (k, i, j): self.gamma[k][i][j]
            for k in range(n) for i in range(n) for j in range(n)
            if not self.gamma[k][i][j].is_zero
        }

    def nabla_basis(self, i: int, j: int) -> MultiVectorField:
        """∇_{∂_i} ∂_j as a vector field."""
        return MultiVectorField(
            self.chart, 1, {(k,): self.gamma[k][i][j] for k in range(self.chart.dim)}, check=False
        )

    def torsion_residual(self, plan: SamplePlan) -> float:
        """max |Γ^k_ij - Γ^k_ji| over the plan."""
        n = self.chart.dim
        worst = 0.0
        for k in range(n):
            for i in range(n):
                for j in range(i + 1, n):
                    diff = self.gamma[k][i][j] - self.gamma[k][j][i]
                    if not diff.is_zero:
                        worst = max(worst, float(np.max(np.abs(diff.values(plan.points)))))
        return worst

    def is_symmetric(self, plan: SamplePlan, tol: float = 1e-10) -> bool:
        return self.torsion_residual(plan) <= tol


class TwistFields:
    """Sparse twist tensors: (k, l) -> {(K, I, J): coefficient}.

    F^{k,l}(X, Y)^K = Σ_{I,J} F[K][I][J] X^I Y^J.
    """

    def __init__(self, chart: Chart, entries: Mapping | None = None):
        self.chart = chart
        n = chart.dim
        clean = {}
        for (k, l), tensor in (entries or {}).items():
            k, l = int(k), int(l)
            if k < 1 or l < 1 or k + l - 1 > n:
                if any(not _as_field(chart, v).is_zero for v in tensor.values()):
                    raise DegreeMismatch(f"twist degree ({k}, {l}) is not admissible for n={n}")
                continue
            out = {}
            for (K, I, J), v in tensor.items():
                K, I, J = check_multi_index(K, n), check_multi_index(I, n), check_multi_index(J, n)
                if (len(K), len(I), len(J)) != (k + l - 1, k, l):
                    raise DegreeMismatch(f"twist key {(K, I, J)} does not match degree ({k}, {l})")
                v = _as_field(chart, v)
                if not v.is_zero:
                    out[(K, I, J)] = v
            if out and (k, l) == (1, 1):
                raise InvalidSeed("the (1, 1) twist tensor must vanish")
            if out:
                clean[(k, l)] = out
        self.entries: dict[tuple[int, int], Tensor] = clean

    @classmethod
    def zero(cls, chart: Chart) -> "TwistFields":
        return cls(chart, {})

    def tensor(self, k: int, l: int) -> Tensor:
        return self.entries.get((k, l), {})

    def coefficient(self, k: int, l: int, K, I, J) -> ScalarField:
        v = self.tensor(k, l).get((tuple(K), tuple(I), tuple(J)))
        return v if v is not None else self.chart.const(0.0)

    @property
    def is_zero(self) -> bool:
        return not self.entries

    def apply(self, X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
        """F^{k,l}(X, Y)."""
        k, l = X.degree, Y.degree
        tensor = self.tensor(k, l)
        acc = _Accumulator(self.chart)
        for (K, I, J), f in tensor.items():
            x, y = X.coeffs.get(I), Y.coeffs.get(J)
            if x is not None and y is not None:
                acc.add(K, 1, f, x, y)
        return MultiVectorField(self.chart, k + l - 1, acc.coeffs(), check=False)

    def __add__(self, other: "TwistFields") -> "TwistFields":
        merged: dict = {}
        for src in (self, other):
            for kl, tensor in src.entries.items():
                t = merged.setdefault(kl, {})
                for key, v in tensor.items():
                    t[key] = t[key] + v if key in t else v
        return TwistFields(self.chart, merged)

    def __mul__(self, c) -> "TwistFields":
        return TwistFields(
            self.chart, {kl: {key: v * c for key, v in t.items()} for kl, t in self.entries.items()}
        )

    __rmul__ = __mul__

    def max_abs(self, plan: SamplePlan) -> float:
        worst = 0.0
        for tensor in self.entries.values():
            for v in tensor.values():
                worst = max(worst, float(np.max(np.abs(v.values(plan.points)))))
        return worst

    def residual(self, other: "TwistFields", plan: SamplePlan) -> float:
        return (self + other * -1.0).max_abs(plan)


# ---------------------------------------------------------------------------
# covariant derivatives

def affine_cov(base: AffineConnection, Z: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    """∇̃_Z Y for a vector field Z, extended to Y as a derivation over wedge factors."""
    if Z.degree != 1:
        raise DegreeError("affine_cov differentiates along a 1-vector field")
    if Z.chart != Y.chart or base.chart != Z.chart:
        raise ChartMismatch("affine_cov arguments live on different charts")
    chart = Z.chart
    n = chart.dim
    l = Y.degree
    if l < 0 or l > n:
        return MultiVectorField.zero(chart, l)
    if l == 0:
        return MultiVectorField.scalar_field(directional(Z, Y.scalar))
    acc = _Accumulator(chart)
    for J, b in Y.coeffs.items():
        db = directional(Z, b)
        if not db.is_zero:
            acc.add(J, 1, db)
        for (i,), z in Z.coeffs.items():
            for s, j in enumerate(J):
                for m in range(n):
                    g = base.gamma[m][i][j]
                    if g.is_zero:
                        continue
                    sign, K = sort_sign(J[:s] + (m,) + J[s + 1:])
                    acc.add(K, sign, z, g, b)
    return MultiVectorField(chart, l, acc.coeffs(), check=False)


def _wedge_left(acc: _Accumulator, prefix, sign: int, coef: ScalarField, V: MultiVectorField):
    """acc += sign * coef * ∂_prefix ^ V."""
    for L, v in V.coeffs.items():
        s, K = merge_sign(prefix, L)
        acc.add(K, s * sign, coef, v)


def _wedge_right(acc: _Accumulator, V: MultiVectorField, suffix, sign: int, coef: ScalarField):
    """acc += sign * coef * V ^ ∂_suffix."""
    for L, v in V.coeffs.items():
        s, K = merge_sign(L, suffix)
        acc.add(K, s * sign, coef, v)


def _graded(fn: Callable, X, Y):
    """Extend a bilinear map on homogeneous fields to GradedMVF arguments."""
    if not isinstance(X, GradedMVF) and not isinstance(Y, GradedMVF):
        return fn(X, Y)
    chart = X.chart
    xs = list(X) if isinstance(X, GradedMVF) else [X]
    ys = list(Y) if isinstance(Y, GradedMVF) else [Y]
    return GradedMVF(chart, [fn(x, y) for x in xs for y in ys])


def induced_cov(base: AffineConnection, X, Y):
    """The induced higher connection of ``base``.

    For X = X_1 ^ ... ^ X_k decomposable,
    ∇_X Y = Σ_j (-1)^{k-j} X_1 ^ ..^ (omit X_j) ^ .. ^ X_k ^ ∇̃_{X_j} Y,
    extended C^∞-linearly in X; ∇_f = 0 and ∇_X f = [X, f].
    """
    return _graded(lambda a, b: _induced(base, a, b), X, Y)


def _induced(base: AffineConnection, X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    if X.chart != Y.chart or base.chart != X.chart:
        raise ChartMismatch("induced_cov arguments live on different charts")
    chart = X.chart
    k, l = X.degree, Y.degree
    degree = k + l - 1
    if k <= 0 or l < 0 or degree > chart.dim:
        return MultiVectorField.zero(chart, degree)
    if l == 0:
        return snb(X, Y)
    needed = sorted({i for I in X.coeffs for i in I})
    along = {i: affine_cov(base, MultiVectorField.basis(chart, (i,)), Y) for i in needed}
    acc = _Accumulator(chart)
    for I, a in X.coeffs.items():
        for r, i in enumerate(I):
            _wedge_left(acc, remove_at(I, r), _sign(k - 1 - r), a, along[i])
    return MultiVectorField(chart, degree, acc.coeffs(), check=False)


@dataclass(frozen=True, eq=False)
class HigherConnection:
    """∇_X Y = ∇̃_X Y + F^{k,l}(X, Y) with ∇̃ the induced extension of ``base``."""

    base: AffineConnection
    twist: TwistFields = field(default=None)

    def __post_init__(self):
        if self.twist is None:
            object.__setattr__(self, "twist", TwistFields.zero(self.base.chart))
        if self.twist.chart != self.base.chart:
            raise ChartMismatch("base connection and twist fields live on different charts")

    @property
    def chart(self) -> Chart:
        return self.base.chart

    @classmethod
    def induced(cls, base: AffineConnection) -> "HigherConnection":
        return cls(base, TwistFields.zero(base.chart))

    def cov(self, X, Y):
        return higher_cov(self, X, Y)

    def decompose(self) -> tuple[AffineConnection, TwistFields]:
        return decompose(self)


def higher_cov(conn: HigherConnection, X, Y):
    """∇_X Y for the higher connection ``conn``."""
    return _graded(lambda a, b: _higher(conn, a, b), X, Y)


def _higher(conn: HigherConnection, X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    out = _induced(conn.base, X, Y)
    if X.degree >= 1 and Y.degree >= 1 and not conn.twist.is_zero:
        out = out + conn.twist.apply(X, Y)
    return out


def decompose(conn: HigherConnection) -> tuple[AffineConnection, TwistFields]:
    return conn.base, conn.twist


def probe_base(cov: Callable, chart: Chart) -> AffineConnection:
    """Read Christoffel symbols off any covariant derivative by evaluating on ∂_i, ∂_j."""
    n = chart.dim
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            v = cov(MultiVectorField.basis(chart, (i,)), MultiVectorField.basis(chart, (j,)))
            for k in range(n):
                gamma[k][i][j] = v[(k,)]
    return AffineConnection(chart, gamma)


def probe_twist(cov: Callable, base: AffineConnection, k: int, l: int) -> Tensor:
    """F^{k,l}[K][I][J] measured as (∇_{∂_I} ∂_J - ∇̃_{∂_I} ∂_J)^K."""
    chart = base.chart
    out = {}
    for I in multi_indices(chart.dim, k):
        X = MultiVectorField.basis(chart, I)
        for J in multi_indices(chart.dim, l):
            Y = MultiVectorField.basis(chart, J)
            diff = cov(X, Y) - _induced(base, X, Y)
            for K, v in diff.coeffs.items():
                out[(K, I, J)] = v
    return out


def recover(cov: Callable, chart: Chart) -> tuple[AffineConnection, TwistFields]:
    """Recover (base, twist) from a covariant-derivative callable by basis probing."""
    base = probe_base(cov, chart)
    n = chart.dim
    entries = {}
    for k in range(1, n + 1):
        for l in range(1, n + 2 - k):
            if (k, l) != (1, 1):
                entries[(k, l)] = probe_twist(cov, base, k, l)
    return base, TwistFields(chart, entries)


# ---------------------------------------------------------------------------
# torsion

def torsion(conn: HigherConnection, X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    """T(X, Y) = ∇_X Y - (-1)^{(k-1)(l-1)} ∇_Y X - [X, Y]."""
    s = _sign((X.degree - 1) * (Y.degree - 1))
    return _higher(conn, X, Y) - _higher(conn, Y, X) * s - snb(X, Y)


@dataclass
class TorsionReport:
    residuals: dict
    one_vector_residual: float
    overlap_residual: float | None
    tol: float

    @property
    def torsion_free(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())

    @property
    def almost_torsion_free(self) -> bool | None:
        if self.overlap_residual is None:
            return None
        return self.one_vector_residual <= self.tol and self.overlap_residual <= self.tol

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def almost_torsion_free_family(chart: Chart, rng: np.random.Generator, extra: int = 2):
    """Pairs (X, Y) with X ^ Y = 0: (f ∂_I, g ∂_J) with I ∩ J nonempty, plus
    random decomposable pairs sharing a vector factor.  Vanishing wedges are
    certified structurally before a pair is returned."""
    from .randomfields import random_mvf, random_polynomial
    from .exterior import wedge_all

    n = chart.dim
    pairs = []
    for k in range(1, n + 1):
        for l in range(1, n + 2 - k):
            for I in multi_indices(n, k):
                for J in multi_indices(n, l):
                    if not set(I) & set(J):
                        continue
                    X = MultiVectorField.basis(chart, I) * random_polynomial(chart, rng)
                    Y = MultiVectorField.basis(chart, J) * random_polynomial(chart, rng)
                    pairs.append((X, Y))
    for _ in range(extra):
        for k in range(1, n + 1):
            for l in range(1, n + 2 - k):
                common = random_mvf(chart, 1, rng, degree=1)
                X = wedge_all(chart, [common] + [random_mvf(chart, 1, rng, 1) for _ in range(k - 1)])
                Y = wedge_all(chart, [common] + [random_mvf(chart, 1, rng, 1) for _ in range(l - 1)])
                pairs.append((X, Y))
    return [(X, Y) for X, Y in pairs if _wedge_vanishes(X, Y)]


def _wedge_vanishes(X, Y) -> bool:
    w = wedge(X, Y)
    return w.is_zero or all(_expands_to_zero(v) for v in w.coeffs.values())


def _expands_to_zero(f: ScalarField) -> bool:
    """Exact zero test for polynomial expressions via expansion into monomials."""
    from .scalar import _Add, _Const, _Coord, _Mul, _Neg, _Pow

    def expand(node):
        if isinstance(node, _Const):
            return {(): node.value}
        if isinstance(node, _Coord):
            return {(node.index,): 1.0}
        if isinstance(node, _Neg):
            return {m: -c for m, c in expand(node.arg).items()}
        if isinstance(node, _Add):
            out = {}
            for t in node.terms:
                for m, c in expand(t).items():
                    out[m] = out.get(m, 0.0) + c
            return out
        if isinstance(node, _Mul):
            out = {(): 1.0}
            for fac in node.factors:
                e = expand(fac)
                nxt = {}
                for m1, c1 in out.items():
                    for m2, c2 in e.items():
                        m = tuple(sorted(m1 + m2))
                        nxt[m] = nxt.get(m, 0.0) + c1 * c2
                out = nxt
            return out
        if isinstance(node, _Pow) and node.exp >= 0:
            out = {(): 1.0}
            base = expand(node.base)
            for _ in range(node.exp):
                nxt = {}
                for m1, c1 in out.items():
                    for m2, c2 in base.items():
                        m = tuple(sorted(m1 + m2))
                        nxt[m] = nxt.get(m, 0.0) + c1 * c2
                out = nxt
            return out
        raise TypeError("not a polynomial")

    try:
        poly = expand(f.node)
    except TypeError:
        return False
    scale = max((abs(c) for c in poly.values()), default=0.0)
    return all(abs(c) <= 1e-12 * max(scale, 1.0) for c in poly.values())


def torsion_report(conn: HigherConnection, plan: SamplePlan, tol: float = 1e-8,
                   almost: bool = True, rng: np.random.Generator | None = None) -> TorsionReport:
    """Torsion residuals on all basis pairs; T is tensorial so basis pairs suffice."""
    chart = conn.chart
    n = chart.dim
    residuals = {}
    for k in range(1, n + 1):
        for l in range(1, n + 2 - k):
            worst = 0.0
            for I in multi_indices(n, k):
                for J in multi_indices(n, l):
                    T = torsion(conn, MultiVectorField.basis(chart, I), MultiVectorField.basis(chart, J))
                    worst = max(worst, T.max_abs(plan.points))
            residuals[(k, l)] = worst
    overlap = None
    if almost:
        rng = rng if rng is not None else np.random.default_rng(plan.seed if plan.seed is not None else 0)
        overlap = 0.0
        for X, Y in almost_torsion_free_family(chart, rng):
            overlap = max(overlap, torsion(conn, X, Y).max_abs(plan.points))
    return TorsionReport(residuals, residuals.get((1, 1), 0.0), overlap, tol)


def symmetrize_twist(F: TwistFields) -> TwistFields:
    """G^{k,l}(X, Y) = F^{k,l}(X, Y) + (-1)^{(k-1)(l-1)} F^{l,k}(Y, X)."""
    out: dict = {}
    for (k, l), tensor in F.entries.items():
        t = out.setdefault((k, l), {})
        for key, v in tensor.items():
            t[key] = t[key] + v if key in t else v
        s = _sign((k - 1) * (l - 1))
        t2 = out.setdefault((l, k), {})
        for (K, I, J), v in tensor.items():
            key = (K, J, I)
            v = v * s
            t2[key] = t2[key] + v if key in t2 else v
    return TwistFields(F.chart, out)


# ---------------------------------------------------------------------------
# upper / lower induced twists

def _seed_tensors(chart: Chart, seeds: Mapping, which: str) -> dict:
    out = {}
    for d, tensor in seeds.items():
        d = int(d)
        if d < 1 or d > chart.dim:
            raise InvalidSeed(f"seed degree {d} out of range for n={chart.dim}")
        clean = {}
        for (K, I, J), v in tensor.items():
            K, I, J = (check_multi_index(K, chart.dim), check_multi_index(I, chart.dim),
                       check_multi_index(J, chart.dim))
            shape = (d, d, 1) if which == "upper" else (d, 1, d)
            if (len(K), len(I), len(J)) != shape:
                raise InvalidSeed(f"seed key {(K, I, J)} does not match degree {d}")
            v = _as_field(chart, v)
            if not v.is_zero:
                clean[(K, I, J)] = v
        if d == 1 and clean:
            raise InvalidSeed("the (1, 1) seed tensor must vanish")
        out[d] = clean
    return out


def _seed_apply(chart, tensor, I, J, degree):
    """Seed contraction on basis arguments, as a MultiVectorField."""
    coeffs = {K: v for (K, I2, J2), v in tensor.items() if I2 == I and J2 == J}
    return MultiVectorField(chart, degree, coeffs, check=False)


def upper_induced_from(base: AffineConnection, seeds: Mapping) -> TwistFields:
    """Twist of the upper-induced connection generated by {F^{k,1}} (``seeds[k]``).

    F^{k,l}(X, Y_1 ^ ... ^ Y_l) = Σ_j (-1)^{j-1} F^{k,1}(X, Y_j) ^ Y_1 ^ .. (omit Y_j) .. ^ Y_l.
    """
    chart = base.chart
    n = chart.dim
    seeds = _seed_tensors(chart, seeds, "upper")
    entries = {}
    for k, tensor in seeds.items():
        if not tensor:
            continue
        for l in range(1, n + 2 - k):
            out = {}
            for I in multi_indices(n, k):
                for J in multi_indices(n, l):
                    acc = _Accumulator(chart)
                    for s, j in enumerate(J):
                        V = _seed_apply(chart, tensor, I, (j,), k)
                        _wedge_right(acc, V, remove_at(J, s), _sign(s), chart.const(1.0))
                    for K, v in acc.coeffs().items():
                        out[(K, I, J)] = v
            entries[(k, l)] = out
    return TwistFields(chart, entries)


def lower_induced_from(base: AffineConnection, seeds: Mapping) -> TwistFields:
    """Twist of the lower-induced connection generated by {F^{1,l}} (``seeds[l]``).

    F^{k,l}(X_1 ^ ... ^ X_k, Y) = Σ_j (-1)^{k-j} X_1 ^ .. (omit X_j) .. ^ X_k ^ F^{1,l}(X_j, Y).
    """
    chart = base.chart
    n = chart.dim
    seeds = _seed_tensors(chart, seeds, "lower")
    entries = {}
    for l, tensor in seeds.items():
        if not tensor:
            continue
        for k in range(1, n + 2 - l):
            out = {}
            for I in multi_indices(n, k):
                for J in multi_indices(n, l):
                    acc = _Accumulator(chart)
                    for r, i in enumerate(I):
                        V = _seed_apply(chart, tensor, (i,), J, l)
                        _wedge_left(acc, remove_at(I, r), _sign(k - 1 - r), chart.const(1.0), V)
                    for K, v in acc.coeffs().items():
                        out[(K, I, J)] = v
            entries[(k, l)] = out
    return TwistFields(chart, entries)


# ---------------------------------------------------------------------------
# forms

def cov_form_value(conn: HigherConnection, X: MultiVectorField, omega: DifferentialForm,
                   Y: MultiVectorField) -> ScalarField:
    """(∇_X ω)(Y) = (-1)^{(k-1)(l-1)} L_X i_Y ω - ω(∇_X Y), evaluated directly."""
    k, l = X.degree, omega.degree
    if Y.degree != l - k + 1:
        raise DegreeMismatch(f"argument must have degree {l - k + 1}, got {Y.degree}")
    first = lie(X, interior_form(Y, omega)).scalar
    second = pair(omega, _higher(conn, X, Y))
    return first * _sign((k - 1) * (l - 1)) - second


def cov_form(conn: HigherConnection, X: MultiVectorField, omega: DifferentialForm) -> DifferentialForm:
    """∇_X ω as a form of degree l - k + 1, recovered by probing on basis fields ∂_J."""
    if X.chart != omega.chart or conn.chart != X.chart:
        raise ChartMismatch("cov_form arguments live on different charts")
    chart = X.chart
    k, l = X.degree, omega.degree
    m = l - k + 1
    if k <= 0 or m < 0 or l > chart.dim:
        return DifferentialForm.zero(chart, m)
    coeffs = {}
    for J in multi_indices(chart.dim, m):
        Y = MultiVectorField.basis(chart, J)
        v = cov_form_value(conn, X, omega, Y)
        if not v.is_zero:
            coeffs[J] = v
    return DifferentialForm(chart, m, coeffs, check=False)
