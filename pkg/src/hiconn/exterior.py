"""Multivector fields and differential forms on a single chart.

Both are stored as maps from strictly increasing multi-indices to
:class:`~hiconn.scalar.ScalarField` coefficients in the coordinate bases
``∂_I`` and ``dx^I``, with ``dx^I(∂_J) = δ_IJ``.  Fields of negative degree or
of degree above the chart dimension are valid zero values.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

import numpy as np

from .errors import ChartMismatch, DegreeError, DegreeMismatch
from .multilinear import KVector, check_multi_index, merge_sign, multi_indices, remove_at, sort_sign
from .scalar import ONE, Chart, ScalarField, _add, _const, _is_zero, _mul, _neg

Number = (int, float, np.integer, np.floating)


class _Accumulator:
    """Collects signed products per multi-index and sums each key once."""

    def __init__(self, chart: Chart):
        self.chart = chart
        self.terms = defaultdict(list)

    def add(self, key, sign, *factors):
        if not sign:
            return
        node = _mul([f.node if isinstance(f, ScalarField) else f for f in factors])
        if sign < 0:
            node = _neg(node)
        self.terms[key].append(node)

    def coeffs(self):
        out = {}
        for key, nodes in self.terms.items():
            node = _add(nodes)
            out[key] = ScalarField(self.chart, node)
        return out


class _AlternatingField:
    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping | None = None, *, check: bool = True):
        self.chart = chart
        self.degree = int(degree)
        clean = {}
        for key, val in (coeffs or {}).items():
            if check:
                key = check_multi_index(key, chart.dim)
                if len(key) != self.degree:
                    raise DegreeMismatch(f"key {key} does not have degree {self.degree}")
                if isinstance(val, Number):
                    val = chart.const(val)
                elif isinstance(val, str):
                    from .scalar import parse
                    val = parse(val, chart)
                if val.chart != chart:
                    raise ChartMismatch(f"{val.chart} vs {chart}")
            if not val.is_zero:
                clean[key] = val
        self.coeffs = clean

    # constructors
    @classmethod
    def zero(cls, chart: Chart, degree: int):
        return cls(chart, degree, {}, check=False)

    @classmethod
    def basis(cls, chart: Chart, index, coefficient=1.0):
        index = tuple(index)
        return cls(chart, len(index), {index: coefficient})

    @classmethod
    def scalar_field(cls, f: ScalarField):
        return cls(f.chart, 0, {(): f}, check=False)

    # access
    def __getitem__(self, index) -> ScalarField:
        val = self.coeffs.get(tuple(index))
        return val if val is not None else self.chart.const(0.0)

    @property
    def scalar(self) -> ScalarField:
        if self.degree != 0:
            raise DegreeError(f"degree {self.degree} value is not a scalar")
        return self[()]

    @property
    def is_zero(self) -> bool:
        """Structural zero test."""
        return not self.coeffs

    def _compatible(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.chart != self.chart:
            raise ChartMismatch(f"{other.chart} vs {self.chart}")

    # arithmetic
    def __add__(self, other):
        self._compatible(other)
        if self.degree != other.degree and self.coeffs and other.coeffs:
            raise DegreeMismatch(f"cannot add degrees {self.degree} and {other.degree}")
        degree = self.degree if self.coeffs or not other.coeffs else other.degree
        acc = _Accumulator(self.chart)
        for src in (self, other):
            for key, val in src.coeffs.items():
                acc.terms[key].append(val.node)
        return type(self)(self.chart, degree, acc.coeffs(), check=False)

    def __neg__(self):
        return type(self)(self.chart, self.degree, {k: -v for k, v in self.coeffs.items()}, check=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, Number):
            node = _const(c)
        elif isinstance(c, ScalarField):
            if c.chart != self.chart:
                raise ChartMismatch(f"{c.chart} vs {self.chart}")
            node = c.node
        else:
            return NotImplemented
        return type(self)(
            self.chart, self.degree,
            {k: ScalarField(self.chart, _mul([node, v.node])) for k, v in self.coeffs.items()},
            check=False,
        )

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    # evaluation
    def at(self, point) -> KVector:
        """Pointwise value as a :class:`KVector`; out-of-range degrees give 0."""
        pts = np.asarray(point, dtype=float).reshape(1, -1)
        if self.degree < 0 or self.degree > self.chart.dim:
            return KVector.zero(self.chart.dim, 0)
        return KVector(self.chart.dim, self.degree, {k: v.values(pts)[0] for k, v in self.coeffs.items()})

    def values(self, points) -> dict:
        return {k: v.values(points) for k, v in self.coeffs.items()}

    def max_abs(self, points) -> float:
        """max over points and coefficients of |coefficient|."""
        m = 0.0
        for v in self.coeffs.values():
            m = max(m, float(np.max(np.abs(v.values(points)))))
        return m

    def residual(self, other, points) -> float:
        """max |self - other| over sample points; the numeric equality test."""
        self._compatible(other)
        return (self - other).max_abs(points)

    def __repr__(self):
        basis = "∂" if isinstance(self, MultiVectorField) else "dx"
        if not self.coeffs:
            return f"{type(self).__name__}(0, degree={self.degree})"
        terms = " + ".join(
            f"({v}){basis}{''.join(map(str, k)) or '()'}" for k, v in sorted(self.coeffs.items())
        )
        return f"{type(self).__name__}({terms})"


class MultiVectorField(_AlternatingField):
    """X = Σ X^I ∂_I, a section of the k-th exterior power of TM."""

    __slots__ = ()


class DifferentialForm(_AlternatingField):
    """ω = Σ ω_I dx^I."""

    __slots__ = ()


class GradedMVF:
    """A finite sum of multivector fields of distinct degrees."""

    def __init__(self, chart: Chart, components: Iterable[MultiVectorField] = ()):
        self.chart = chart
        self.components: dict[int, MultiVectorField] = {}
        for c in components:
            if c.chart != chart:
                raise ChartMismatch(f"{c.chart} vs {chart}")
            if c.degree < 0 or c.degree > chart.dim:
                continue
            if c.degree in self.components:
                self.components[c.degree] = self.components[c.degree] + c
            else:
                self.components[c.degree] = c

    def component(self, k: int) -> MultiVectorField:
        return self.components.get(k, MultiVectorField.zero(self.chart, k))

    def __add__(self, other: "GradedMVF") -> "GradedMVF":
        return GradedMVF(self.chart, [*self.components.values(), *other.components.values()])

    def __iter__(self):
        return iter(self.components[k] for k in sorted(self.components))

    def residual(self, other: "GradedMVF", points) -> float:
        degrees = set(self.components) | set(other.components)
        return max((self.component(k).residual(other.component(k), points) for k in degrees), default=0.0)


# ---------------------------------------------------------------------------
# algebra

def _check_chart(a, b):
    if a.chart != b.chart:
        raise ChartMismatch(f"{a.chart} vs {b.chart}")


def wedge(a: _AlternatingField, b: _AlternatingField) -> _AlternatingField:
    a._compatible(b)
    degree = a.degree + b.degree
    if a.degree < 0 or b.degree < 0 or degree > a.chart.dim:
        return type(a).zero(a.chart, degree)
    acc = _Accumulator(a.chart)
    for I, f in a.coeffs.items():
        for J, g in b.coeffs.items():
            s, K = merge_sign(I, J)
            acc.add(K, s, f, g)
    return type(a)(a.chart, degree, acc.coeffs(), check=False)


def wedge_all(chart: Chart, factors: Iterable[_AlternatingField], cls=None):
    factors = list(factors)
    cls = cls or type(factors[0])
    acc = cls.scalar_field(chart.const(1.0))
    for f in factors:
        acc = wedge(acc, f)
    return acc


def pair(omega: DifferentialForm, X: MultiVectorField) -> ScalarField:
    """ω(X) = Σ_I ω_I X^I."""
    _check_chart(omega, X)
    if omega.degree != X.degree:
        raise DegreeMismatch(f"cannot pair a {omega.degree}-form with a {X.degree}-vector")
    nodes = [_mul([w.node, X.coeffs[I].node]) for I, w in omega.coeffs.items() if I in X.coeffs]
    return ScalarField(omega.chart, _add(nodes))


def interior_form(X: MultiVectorField, omega: DifferentialForm) -> DifferentialForm:
    """i_X ω, defined by (i_X ω)(Y) = ω(X ^ Y)."""
    _check_chart(X, omega)
    k, l = X.degree, omega.degree
    if k < 0 or l < 0:
        return DifferentialForm.zero(X.chart, l - k)
    if k == 0:
        return omega * X.scalar
    if l < k:
        return DifferentialForm.zero(X.chart, l - k)
    acc = _Accumulator(X.chart)
    for L, w in omega.coeffs.items():
        Lset = set(L)
        for I, x in X.coeffs.items():
            if not Lset.issuperset(I):
                continue
            J = tuple(j for j in L if j not in I)
            s, _ = merge_sign(I, J)
            acc.add(J, s, x, w)
    return DifferentialForm(X.chart, l - k, acc.coeffs(), check=False)


def interior_fn(f: ScalarField, X: MultiVectorField) -> MultiVectorField:
    """i_f X, the (k-1)-derivation g ↦ X(f, g_1, ...)."""
    if f.chart != X.chart:
        raise ChartMismatch(f"{f.chart} vs {X.chart}")
    k = X.degree
    if k <= 0:
        return MultiVectorField.zero(X.chart, k - 1)
    acc = _Accumulator(X.chart)
    for I, x in X.coeffs.items():
        for r, i in enumerate(I):
            df = f.partial(i)
            if df.is_zero:
                continue
            acc.add(remove_at(I, r), -1 if r % 2 else 1, x, df)
    return MultiVectorField(X.chart, k - 1, acc.coeffs(), check=False)


def d(omega: DifferentialForm) -> DifferentialForm:
    """Exterior derivative dω = Σ_I Σ_j ∂_j ω_I dx^j ^ dx^I."""
    n = omega.chart.dim
    if omega.degree < 0 or omega.degree >= n:
        return DifferentialForm.zero(omega.chart, omega.degree + 1)
    acc = _Accumulator(omega.chart)
    for I, w in omega.coeffs.items():
        for j in range(n):
            dw = w.partial(j)
            if dw.is_zero:
                continue
            s, K = merge_sign((j,), I)
            acc.add(K, s, dw)
    return DifferentialForm(omega.chart, omega.degree + 1, acc.coeffs(), check=False)


def lie(X: MultiVectorField, omega: DifferentialForm) -> DifferentialForm:
    """L_X ω = d i_X ω - (-1)^k i_X dω, for k >= 1."""
    _check_chart(X, omega)
    k = X.degree
    if k < 1:
        raise DegreeError("the Lie derivative along a multivector field needs degree >= 1")
    sign = -1 if k % 2 else 1
    return d(interior_form(X, omega)) - interior_form(X, d(omega)) * sign


def directional(X: MultiVectorField, f: ScalarField) -> ScalarField:
    """X f for a vector field X."""
    if X.degree != 1:
        raise DegreeError("directional derivative needs a 1-vector field")
    nodes = [_mul([x.node, f.partial(i).node]) for (i,), x in X.coeffs.items()]
    return ScalarField(X.chart, _add(nodes))


def _vec_lie_bracket(u, p, v, q, chart):
    """[u ∂_p, v ∂_q] as {index: node} (u, v are nodes or None for the constant 1)."""
    out = {}
    if v is not None:
        dv = v.diff(p)
        if not _is_zero(dv):
            out[q] = [_mul([u if u is not None else ONE, dv])]
    if u is not None:
        du = u.diff(q)
        if not _is_zero(du):
            out.setdefault(p, []).append(_neg(_mul([v if v is not None else ONE, du])))
    return out


def snb(X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    """Schouten–Nijenhuis bracket [X, Y] of degree k + l - 1.

    Each basis term a ∂_I is read as the decomposable (a ∂_{i1}) ^ ∂_{i2} ^ ... ,
    and the decomposable formula
    Σ_{r,s} (-1)^{r+s} [X_r, Y_s] ^ X[r] ^ Y[s] (1-based r, s) is applied.
    """
    _check_chart(X, Y)
    chart = X.chart
    k, l = X.degree, Y.degree
    if k < 0 or l < 0 or (k == 0 and l == 0):
        return MultiVectorField.zero(chart, k + l - 1)
    if l == 0:
        out = interior_fn(Y.scalar, X)
        return out if k % 2 else -out
    if k == 0:
        return -interior_fn(X.scalar, Y)
    degree = k + l - 1
    if degree > chart.dim:
        return MultiVectorField.zero(chart, degree)
    acc = _Accumulator(chart)
    for I, a in X.coeffs.items():
        for J, b in Y.coeffs.items():
            for r in range(k):
                u = a.node if r == 0 else None
                rest_x = ONE if r == 0 else a.node
                I_rest = remove_at(I, r)
                for s_ in range(l):
                    v = b.node if s_ == 0 else None
                    rest_y = ONE if s_ == 0 else b.node
                    J_rest = remove_at(J, s_)
                    sign = 1 if (r + s_) % 2 == 0 else -1
                    for m, nodes in _vec_lie_bracket(u, I[r], v, J[s_], chart).items():
                        s, K = sort_sign((m, *I_rest, *J_rest))
                        if not s:
                            continue
                        for node in nodes:
                            acc.add(K, s * sign, node, rest_x, rest_y)
    return MultiVectorField(chart, degree, acc.coeffs(), check=False)


def coordinate_field(chart: Chart, index) -> MultiVectorField:
    """∂_I."""
    return MultiVectorField.basis(chart, index)


def coordinate_form(chart: Chart, index) -> DifferentialForm:
    """dx^I."""
    return DifferentialForm.basis(chart, index)


def basis_fields(chart: Chart, k: int) -> list[tuple[tuple, MultiVectorField]]:
    return [(I, MultiVectorField.basis(chart, I)) for I in multi_indices(chart.dim, k)]
