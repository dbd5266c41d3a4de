"""Closed-form scalar fields on a coordinate chart.

A :class:`ScalarField` wraps an immutable expression tree over the chart
coordinates.  Trees support exact structural differentiation and vectorized
evaluation on many sample points at once.  The only simplification performed
is constant folding (including the 0/1 identities of ``+`` and ``*``); equality
of two fields is decided numerically on a :class:`SamplePlan`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ChartMismatch, DivisionByZero, DomainMismatch, ParseError, UnknownIdentifier

_FUNCTIONS = ("sin", "cos", "exp")


@dataclass(frozen=True)
class Chart:
    dim: int
    coord_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        names = tuple(self.coord_names) or tuple(f"x{i}" for i in range(self.dim))
        if len(names) != self.dim:
            raise ValueError(f"expected {self.dim} coordinate names, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be unique: {names}")
        for name in names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name) or name in _FUNCTIONS:
                raise ValueError(f"invalid coordinate name {name!r}")
        object.__setattr__(self, "coord_names", names)

    def coord(self, i: int) -> "ScalarField":
        return ScalarField(self, _coord(i, self.dim))

    def const(self, value: float) -> "ScalarField":
        return ScalarField(self, _const(value))

    def coords(self) -> list["ScalarField"]:
        return [self.coord(i) for i in range(self.dim)]


# ---------------------------------------------------------------------------
# expression nodes

class _Node:
    __slots__ = ("_dcache",)

    def diff(self, i: int) -> "_Node":
        cache = getattr(self, "_dcache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_dcache", cache)
        d = cache.get(i)
        if d is None:
            d = self._diff(i)
            cache[i] = d
        return d


class _Const(_Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def _diff(self, i):
        return ZERO

    def __repr__(self):
        return f"Const({self.value!r})"


class _Coord(_Node):
    __slots__ = ("index",)

    def __init__(self, index):
        self.index = index

    def _diff(self, i):
        return ONE if i == self.index else ZERO

    def __repr__(self):
        return f"Coord({self.index})"


class _Add(_Node):
    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = terms

    def _diff(self, i):
        return _add([t.diff(i) for t in self.terms])

    def __repr__(self):
        return f"Add{self.terms!r}"


class _Mul(_Node):
    __slots__ = ("factors",)

    def __init__(self, factors):
        self.factors = factors

    def _diff(self, i):
        fs = self.factors
        out = []
        for j, f in enumerate(fs):
            df = f.diff(i)
            if _is_zero(df):
                continue
            out.append(_mul([df, *fs[:j], *fs[j + 1:]]))
        return _add(out)

    def __repr__(self):
        return f"Mul{self.factors!r}"


class _Neg(_Node):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def _diff(self, i):
        return _neg(self.arg.diff(i))

    def __repr__(self):
        return f"Neg({self.arg!r})"


class _Pow(_Node):
    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        self.base = base
        self.exp = exp

    def _diff(self, i):
        db = self.base.diff(i)
        if _is_zero(db):
            return ZERO
        return _mul([_const(self.exp), _pow(self.base, self.exp - 1), db])

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exp})"


class _Recip(_Node):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def _diff(self, i):
        da = self.arg.diff(i)
        if _is_zero(da):
            return ZERO
        return _mul([MINUS_ONE, da, _pow(self, 2)])

    def __repr__(self):
        return f"Recip({self.arg!r})"


class _Func(_Node):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        self.name = name
        self.arg = arg

    def _diff(self, i):
        da = self.arg.diff(i)
        if _is_zero(da):
            return ZERO
        if self.name == "sin":
            outer = _func("cos", self.arg)
        elif self.name == "cos":
            outer = _neg(_func("sin", self.arg))
        else:
            outer = self
        return _mul([outer, da])

    def __repr__(self):
        return f"{self.name}({self.arg!r})"


ZERO = _Const(0.0)
ONE = _Const(1.0)
MINUS_ONE = _Const(-1.0)


def _is_zero(node) -> bool:
    return isinstance(node, _Const) and node.value == 0.0


def _const(value) -> _Node:
    value = float(value)
    if value == 0.0:
        return ZERO
    if value == 1.0:
        return ONE
    return _Const(value)


def _coord(i: int, dim: int) -> _Node:
    if not 0 <= i < dim:
        raise DomainMismatch(f"coordinate index {i} out of range for dim {dim}")
    return _Coord(i)


def _add(nodes: Iterable[_Node]) -> _Node:
    terms = []
    c = 0.0
    for n in nodes:
        if isinstance(n, _Add):
            for t in n.terms:
                if isinstance(t, _Const):
                    c += t.value
                else:
                    terms.append(t)
        elif isinstance(n, _Const):
            c += n.value
        else:
            terms.append(n)
    if c != 0.0:
        terms.append(_const(c))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return _Add(tuple(terms))


def _mul(nodes: Iterable[_Node]) -> _Node:
    factors = []
    c = 1.0
    stack = list(nodes)
    stack.reverse()
    while stack:
        n = stack.pop()
        if isinstance(n, _Const):
            if n.value == 0.0:
                return ZERO
            c *= n.value
        elif isinstance(n, _Mul):
            stack.extend(reversed(n.factors))
        elif isinstance(n, _Neg):
            c = -c
            stack.append(n.arg)
        else:
            factors.append(n)
    if not factors:
        return _const(c)
    if c != 1.0:
        factors.insert(0, _const(c))
    if len(factors) == 1:
        return factors[0]
    return _Mul(tuple(factors))


def _neg(node: _Node) -> _Node:
    if isinstance(node, _Const):
        return _const(-node.value)
    if isinstance(node, _Neg):
        return node.arg
    if isinstance(node, _Mul) and isinstance(node.factors[0], _Const):
        return _mul([_const(-node.factors[0].value), *node.factors[1:]])
    return _Neg(node)


def _pow(base: _Node, exp: int) -> _Node:
    exp = int(exp)
    if exp == 0:
        return ONE
    if exp == 1:
        return base
    if isinstance(base, _Const) and (base.value != 0.0 or exp > 0):
        return _const(base.value ** exp)
    if isinstance(base, _Pow):
        return _pow(base.base, base.exp * exp)
    return _Pow(base, exp)


def _recip(node: _Node) -> _Node:
    if isinstance(node, _Const) and node.value != 0.0:
        return _const(1.0 / node.value)
    return _Recip(node)


def _func(name: str, arg: _Node) -> _Node:
    if isinstance(arg, _Const):
        return _const(getattr(math, name)(arg.value))
    return _Func(name, arg)


# ---------------------------------------------------------------------------
# evaluation

_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _evaluate(node: _Node, pts: np.ndarray, memo: dict) -> np.ndarray | float:
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, _Const):
        val = node.value
    elif isinstance(node, _Coord):
        val = pts[:, node.index]
    elif isinstance(node, _Add):
        val = _evaluate(node.terms[0], pts, memo)
        for t in node.terms[1:]:
            val = val + _evaluate(t, pts, memo)
    elif isinstance(node, _Mul):
        val = _evaluate(node.factors[0], pts, memo)
        for f in node.factors[1:]:
            val = val * _evaluate(f, pts, memo)
    elif isinstance(node, _Neg):
        val = -_evaluate(node.arg, pts, memo)
    elif isinstance(node, _Pow):
        b = _evaluate(node.base, pts, memo)
        if node.exp < 0:
            _check_nonzero(b, pts, "negative power")
            val = 1.0 / np.power(b, -node.exp)
        else:
            val = np.power(b, node.exp)
    elif isinstance(node, _Recip):
        a = _evaluate(node.arg, pts, memo)
        _check_nonzero(a, pts, "reciprocal")
        val = 1.0 / a
    elif isinstance(node, _Func):
        val = _NP_FUNCS[node.name](_evaluate(node.arg, pts, memo))
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    memo[key] = val
    return val


def _check_nonzero(values, pts, what):
    arr = np.broadcast_to(np.asarray(values, dtype=float), (pts.shape[0],))
    bad = np.flatnonzero(arr == 0.0)
    if bad.size:
        point = tuple(float(v) for v in pts[bad[0]])
        raise DivisionByZero(f"{what} of zero at point {point}", point=point)


# ---------------------------------------------------------------------------
# the public field type

Number = (int, float, np.integer, np.floating)


class ScalarField:
    """A differentiable function on a chart, stored as an expression tree."""

    __slots__ = ("chart", "node")

    def __init__(self, chart: Chart, node: _Node):
        self.chart = chart
        self.node = node

    # construction helpers
    def _lift(self, other) -> _Node:
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise ChartMismatch(f"{other.chart} vs {self.chart}")
            return other.node
        if isinstance(other, Number):
            return _const(other)
        return NotImplemented

    def _wrap(self, node):
        return ScalarField(self.chart, node)

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_add([self.node, o]))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_add([self.node, _neg(o)]))

    def __rsub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_add([o, _neg(self.node)]))

    def __mul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_mul([self.node, o]))

    def __rmul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_mul([o, self.node]))

    def __truediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_mul([self.node, _recip(o)]))

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self._wrap(_mul([o, _recip(self.node)]))

    def __neg__(self):
        return self._wrap(_neg(self.node))

    def __pow__(self, exp: int):
        if not isinstance(exp, (int, np.integer)):
            raise TypeError("only integer powers are supported")
        return self._wrap(_pow(self.node, int(exp)))

    def recip(self) -> "ScalarField":
        return self._wrap(_recip(self.node))

    def sin(self):
        return self._wrap(_func("sin", self.node))

    def cos(self):
        return self._wrap(_func("cos", self.node))

    def exp(self):
        return self._wrap(_func("exp", self.node))

    @staticmethod
    def sum(chart: Chart, fields: Iterable["ScalarField"]) -> "ScalarField":
        nodes = []
        for f in fields:
            if f.chart != chart:
                raise ChartMismatch(f"{f.chart} vs {chart}")
            nodes.append(f.node)
        return ScalarField(chart, _add(nodes))

    @staticmethod
    def product(chart: Chart, fields: Iterable["ScalarField"]) -> "ScalarField":
        nodes = []
        for f in fields:
            if f.chart != chart:
                raise ChartMismatch(f"{f.chart} vs {chart}")
            nodes.append(f.node)
        return ScalarField(chart, _mul(nodes))

    # calculus
    def partial(self, i: int) -> "ScalarField":
        if not 0 <= i < self.chart.dim:
            raise DomainMismatch(f"partial index {i} out of range for dim {self.chart.dim}")
        return self._wrap(self.node.diff(i))

    @property
    def is_zero(self) -> bool:
        """Structural zero test (constant-folded 0); not a numerical test."""
        return _is_zero(self.node)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.node, _Const)

    # evaluation
    def values(self, points) -> np.ndarray:
        pts = _as_points(points, self.chart.dim)
        out = _evaluate(self.node, pts, {})
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    def __call__(self, point) -> float:
        return float(self.values([point])[0])

    def __str__(self):
        return to_dsl(self)

    def __repr__(self):
        return f"ScalarField({to_dsl(self)!r})"


def _as_points(points, dim) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DomainMismatch(f"points of shape {pts.shape} do not match chart dimension {dim}")
    return pts


def evaluate(f: ScalarField, p: Sequence[float]) -> float:
    return f(p)


def partial(f: ScalarField, i: int) -> ScalarField:
    return f.partial(i)


# ---------------------------------------------------------------------------
# printing

def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 else s


def _to_str(node: _Node, names, prec: int) -> str:
    # prec: 0 = sum term, 1 = product factor, 2 = divisor, 3 = operand of '^' or unary '-'

    if isinstance(node, _Const):
        return _fmt_number(node.value)
    if isinstance(node, _Coord):
        return names[node.index]
    if isinstance(node, _Func):
        return f"{node.name}({_to_str(node.arg, names, 0)})"
    if isinstance(node, _Add):
        parts = []
        for j, t in enumerate(node.terms):
            if j and isinstance(t, _Neg):
                parts.append(" - " + _to_str(t.arg, names, 1))
            else:
                parts.append((" + " if j else "") + _to_str(t, names, 0))
        s = "".join(parts)
        return s if prec == 0 else f"({s})"
    if isinstance(node, _Neg):
        s = "-" + _to_str(node.arg, names, 3)
        return s if prec == 0 else f"({s})"
    if isinstance(node, _Mul):
        head, divs = [], []
        for f in node.factors:
            (divs if isinstance(f, _Recip) else head).append(f)
        s = "*".join(_to_str(f, names, 1) for f in head) if head else "1"
        for d in divs:
            s += "/" + _to_str(d.arg, names, 2)
        return s if prec <= 1 else f"({s})"
    if isinstance(node, _Recip):
        s = "1/" + _to_str(node.arg, names, 2)
        return s if prec <= 1 else f"({s})"
    if isinstance(node, _Pow):
        s = f"{_to_str(node.base, names, 3)}^{node.exp}"
        return s if prec < 3 else f"({s})"
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def to_dsl(f: ScalarField) -> str:
    """Render a field in the DSL; ``parse(to_dsl(f))`` evaluates like ``f``."""
    return _to_str(f.node, f.chart.coord_names, 0)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, chart: Chart):
        self.tokens = _tokenize(src)
        self.i = 0
        self.chart = chart
        self.names = {name: k for k, name in enumerate(chart.coord_names)}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> _Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        terms = [self.term()]
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, _ = self.take()
            t = self.term()
            terms.append(t if op == "+" else _neg(t))
        return _add(terms)

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, _ = self.take()
            rhs = self.factor()
            node = _mul([node, rhs if op == "*" else _recip(rhs)])
        return node

    def factor(self):
        base = self.base()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be an integer", pos)
            return _pow(base, sign * int(text))
        return base

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return _const(float(text))
        if kind == "id":
            if text in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _func(text, arg)
            if text not in self.names:
                raise UnknownIdentifier(f"unknown identifier {text!r}", pos)
            return _Coord(self.names[text])
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if text == "-":
            return _neg(self.base())
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse(src: str, chart: Chart) -> ScalarField:
    """Parse a DSL string into a field on ``chart``.

    Grammar::

        expr   := term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := base ('^' ['-'] integer)?
        base   := number | ident | '(' expr ')' | ('sin'|'cos'|'exp') '(' expr ')' | '-' base

    Note that unary minus binds tighter than ``^``: ``-x0^2`` is ``(-x0)^2``.
    """
    if not isinstance(src, str):
        raise ParseError(f"expected a string, got {type(src).__name__}")
    return ScalarField(chart, _Parser(src, chart).parse())


# ---------------------------------------------------------------------------
# numerical equality on sample plans

@dataclass(frozen=True)
class SamplePlan:
    points: np.ndarray
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    seed: int | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("a sample plan needs at least one point")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, chart: Chart, count: int = 20, seed: int = 0, box=(-1.0, 1.0),
                abs_tol: float = 1e-9, rel_tol: float = 1e-9) -> "SamplePlan":
        rng = np.random.default_rng(seed)
        pts = rng.uniform(box[0], box[1], size=(count, chart.dim))
        return cls(pts, abs_tol=abs_tol, rel_tol=rel_tol, seed=seed)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class EqualityReport:
    residual: float
    equal: bool
    worst_point: tuple[float, ...] = field(default=())


def fields_equal_on(f: ScalarField, g: ScalarField, plan: SamplePlan) -> EqualityReport:
    if f.chart != g.chart:
        raise ChartMismatch(f"{f.chart} vs {g.chart}")
    fv = f.values(plan.points)
    gv = g.values(plan.points)
    diff = np.abs(fv - gv)
    allowed = plan.abs_tol + plan.rel_tol * (1.0 + np.maximum(np.abs(fv), np.abs(gv)))
    worst = int(np.argmax(diff))
    return EqualityReport(
        residual=float(diff[worst]),
        equal=bool(np.all(diff <= allowed)),
        worst_point=tuple(float(v) for v in plan.points[worst]),
    )
