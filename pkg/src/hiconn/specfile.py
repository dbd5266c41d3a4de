"""YAML manifold specs: load with line-aware validation, build library objects, dump.

Multi-index keys are comma-separated increasing integers ("0,2"; "" for degree
0); in charts of dimension <= 10 the compact digit form "02" is also read.  Christoffel keys are "k,i,j" and twist keys are "K;I;J" inside a
"k,l" block.  Every field value is a DSL string (or a bare number).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import yaml

from .bilinear import BilinearFormEta, Metric
from .connection import AffineConnection, HigherConnection, TwistFields
from .errors import HiconnError, ParseError, SpecError
from .exterior import DifferentialForm, MultiVectorField
from .multilinear import check_multi_index
from .scalar import Chart, SamplePlan, ScalarField, parse, to_dsl

TOP_KEYS = ("dim", "coords", "plan", "fields", "mvfs", "forms", "metric", "christoffel", "twist", "eta", "expect")
PLAN_KEYS = ("seed", "points", "box", "tol")
EXPECT_KEYS = ("torsion_free", "parallel", "almost_torsion_free")


@dataclass(frozen=True)
class PlanConfig:
    seed: int = 0
    points: int = 20
    box: tuple[float, float] = (-1.0, 1.0)
    tol: float = 1e-8


@dataclass
class ManifoldSpec:
    """A parsed spec document; ``raw`` keeps the plain data, ``marks`` maps paths to lines."""

    raw: dict
    marks: dict = field(default_factory=dict)

    def line(self, *path) -> int | None:
        while path:
            if path in self.marks:
                return self.marks[path]
            path = path[:-1]
        return None

    @property
    def dim(self) -> int:
        return self.raw["dim"]

    @property
    def plan_config(self) -> PlanConfig:
        p = self.raw.get("plan") or {}
        return PlanConfig(
            seed=int(p.get("seed", 0)),
            points=int(p.get("points", 20)),
            box=tuple(float(b) for b in p.get("box", (-1.0, 1.0))),
            tol=float(p.get("tol", 1e-8)),
        )


@dataclass
class Built:
    chart: Chart
    plan_config: PlanConfig
    fields: dict
    mvfs: dict
    forms: dict
    metric: Metric | None
    base: AffineConnection | None
    twist: TwistFields
    eta: BilinearFormEta | None
    expect: dict

    @property
    def connection(self) -> HigherConnection:
        return HigherConnection(self.base or AffineConnection.flat(self.chart), self.twist)

    def plan(self, seed: int | None = None, points: int | None = None) -> SamplePlan:
        cfg = self.plan_config
        return SamplePlan.uniform(self.chart, points or cfg.points, seed=cfg.seed if seed is None else seed,
                                  box=cfg.box)


# ---------------------------------------------------------------------------
# loading

def _convert(node, path, marks, loader):
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            if not isinstance(key_node, yaml.ScalarNode):
                raise SpecError("mapping keys must be scalars", key_node.start_mark.line + 1)
            key = str(key_node.value)
            if key in out:
                raise SpecError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
            out[key] = _convert(value_node, path + (key,), marks, loader)
            marks[path + (key,)] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_convert(v, path + (i,), marks, loader) for i, v in enumerate(node.value)]
    return loader.construct_object(node, deep=True)


def loads_spec(text: str) -> ManifoldSpec:
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
        finally:
            loader.dispose()
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                        mark.line + 1 if mark else None, mark.column + 1 if mark else None) from None
    if node is None:
        raise SpecError("empty spec document")
    marks: dict = {}
    raw = _convert(node, (), marks, yaml.SafeLoader(""))
    if not isinstance(raw, dict):
        raise SpecError("spec document must be a mapping", 1)
    spec = ManifoldSpec(raw, marks)
    _validate_shape(spec)
    return spec


def load_spec(path) -> ManifoldSpec:
    with open(path, encoding="utf-8") as fh:
        return loads_spec(fh.read())


def _validate_shape(spec: ManifoldSpec) -> None:
    raw = spec.raw
    for key in raw:
        if key not in TOP_KEYS:
            raise SpecError(f"unknown top-level key {key!r}", spec.line(key))
    dim = raw.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SpecError("'dim' must be a positive integer", spec.line("dim"))
    for key in ("plan", "fields", "mvfs", "forms", "christoffel", "twist", "eta", "expect"):
        if key in raw and raw[key] is not None and not isinstance(raw[key], dict):
            raise SpecError(f"'{key}' must be a mapping", spec.line(key))
    for key in (raw.get("plan") or {}):
        if key not in PLAN_KEYS:
            raise SpecError(f"unknown plan key {key!r}", spec.line("plan", key))
    for key, v in (raw.get("expect") or {}).items():
        if key not in EXPECT_KEYS:
            raise SpecError(f"unknown expectation {key!r}", spec.line("expect", key))
        if not isinstance(v, bool):
            raise SpecError(f"expectation {key!r} must be true or false", spec.line("expect", key))
    try:
        spec.plan_config
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid plan settings: {exc}", spec.line("plan")) from None


def _index(text, n: int, spec: ManifoldSpec, path, degree: int | None = None) -> tuple:
    text = str(text).strip()
    if text in ("", "()"):
        idx = ()
    elif "," not in text and len(text) > 1 and text.isdigit() and n <= 10:
        idx = tuple(int(c) for c in text)
    else:
        try:
            idx = tuple(int(t) for t in text.split(","))
        except ValueError:
            raise SpecError(f"malformed multi-index {text!r}", spec.line(*path)) from None
    try:
        idx = check_multi_index(idx, n)
    except ValueError as exc:
        raise SpecError(str(exc), spec.line(*path)) from None
    if degree is not None and len(idx) != degree:
        raise SpecError(f"multi-index {text!r} does not have degree {degree}", spec.line(*path))
    return idx


def _expr(value, chart: Chart, spec: ManifoldSpec, path) -> ScalarField:
    if isinstance(value, bool) or value is None:
        raise SpecError("expected a DSL expression", spec.line(*path))
    if isinstance(value, (int, float)):
        return chart.const(float(value))
    try:
        return parse(str(value), chart)
    except ParseError as exc:
        raise SpecError(f"in expression {value!r}: {exc}", spec.line(*path)) from None


def _alternating(cls, entry, chart, spec, path):
    if not isinstance(entry, dict):
        raise SpecError("expected a mapping with 'coeffs'", spec.line(*path))
    coeffs_raw = entry.get("coeffs", {})
    if not isinstance(coeffs_raw, dict):
        raise SpecError("'coeffs' must be a mapping", spec.line(*path, "coeffs"))
    degree = entry.get("degree")
    if degree is None:
        keys = list(coeffs_raw)
        if not keys:
            raise SpecError("cannot infer the degree of an empty field; give 'degree'", spec.line(*path))
        degree = len(_index(keys[0], chart.dim, spec, path + ("coeffs", keys[0])))
    if not isinstance(degree, int) or degree < 0 or degree > chart.dim:
        raise SpecError(f"degree must be an integer in [0, {chart.dim}]", spec.line(*path, "degree"))
    coeffs = {}
    for key, value in coeffs_raw.items():
        p = path + ("coeffs", key)
        coeffs[_index(key, chart.dim, spec, p, degree)] = _expr(value, chart, spec, p)
    return cls(chart, degree, coeffs)


def build(spec: ManifoldSpec) -> Built:
    """Turn a validated spec into library objects; errors carry spec line numbers."""
    raw = spec.raw
    n = raw["dim"]
    coords = raw.get("coords") or ()
    try:
        chart = Chart(n, tuple(coords))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid coordinates: {exc}", spec.line("coords")) from None
    fields = {name: _expr(v, chart, spec, ("fields", name)) for name, v in (raw.get("fields") or {}).items()}
    mvfs = {name: _alternating(MultiVectorField, e, chart, spec, ("mvfs", name))
            for name, e in (raw.get("mvfs") or {}).items()}
    forms = {name: _alternating(DifferentialForm, e, chart, spec, ("forms", name))
             for name, e in (raw.get("forms") or {}).items()}

    metric = None
    if raw.get("metric") is not None:
        rows = raw["metric"]
        if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
            raise SpecError(f"'metric' must be a {n}x{n} list of lists", spec.line("metric"))
        g = [[_expr(v, chart, spec, ("metric", i, j)) for j, v in enumerate(r)] for i, r in enumerate(rows)]
        try:
            metric = Metric(chart, g)
        except (ValueError, HiconnError) as exc:
            raise SpecError(str(exc), spec.line("metric")) from None

    base = None
    if raw.get("christoffel") is not None:
        entries = {}
        for key, v in raw["christoffel"].items():
            p = ("christoffel", key)
            try:
                k, i, j = (int(t) for t in str(key).split(","))
            except ValueError:
                raise SpecError(f"Christoffel key {key!r} must be 'k,i,j'", spec.line(*p)) from None
            if not all(0 <= a < n for a in (k, i, j)):
                raise SpecError(f"Christoffel key {key!r} out of range", spec.line(*p))
            entries[(k, i, j)] = _expr(v, chart, spec, p)
        base = AffineConnection.from_entries(chart, entries)

    twist_entries = {}
    for kl, block in (raw.get("twist") or {}).items():
        p = ("twist", kl)
        try:
            k, l = (int(t) for t in str(kl).split(","))
        except ValueError:
            raise SpecError(f"twist block key {kl!r} must be 'k,l'", spec.line(*p)) from None
        if k < 1 or l < 1 or k + l - 1 > n:
            raise SpecError(f"twist degree ({k}, {l}) is not admissible for dim {n}", spec.line(*p))
        if not isinstance(block, dict):
            raise SpecError("twist block must be a mapping", spec.line(*p))
        if (k, l) == (1, 1) and any(str(v).strip() not in ("0", "0.0") for v in block.values()):
            raise SpecError("the (1, 1) twist tensor must vanish", spec.line(*p))
        tensor = {}
        for key, v in block.items():
            q = p + (key,)
            parts = str(key).split(";")
            if len(parts) != 3:
                raise SpecError(f"twist key {key!r} must be 'K;I;J'", spec.line(*q))
            K = _index(parts[0], n, spec, q, k + l - 1)
            I = _index(parts[1], n, spec, q, k)
            J = _index(parts[2], n, spec, q, l)
            tensor[(K, I, J)] = _expr(v, chart, spec, q)
        twist_entries[(k, l)] = tensor
    try:
        twist = TwistFields(chart, twist_entries)
    except HiconnError as exc:
        raise SpecError(str(exc), spec.line("twist")) from None

    eta = None
    if raw.get("eta") is not None:
        forms_eta = {}
        for t, entry in raw["eta"].items():
            p = ("eta", t)
            try:
                t_int = int(t)
            except ValueError:
                raise SpecError(f"eta degree {t!r} must be an integer", spec.line(*p)) from None
            if not 0 <= t_int <= n:
                raise SpecError(f"eta degree {t_int} out of range for dim {n}", spec.line(*p))
            if not isinstance(entry, dict):
                if t_int != 0:
                    raise SpecError("eta entries of positive degree must map multi-indices to expressions",
                                    spec.line(*p))
                entry = {"": entry}
            coeffs = {_index(key, n, spec, p + (key,), t_int): _expr(v, chart, spec, p + (key,))
                      for key, v in entry.items()}
            forms_eta[t_int] = DifferentialForm(chart, t_int, coeffs)
        eta = BilinearFormEta(chart, forms_eta)

    return Built(chart, spec.plan_config, fields, mvfs, forms, metric, base, twist, eta,
                 dict(raw.get("expect") or {}))


# ---------------------------------------------------------------------------
# dumping

def index_key(I) -> str:
    return ",".join(str(i) for i in I)


def connection_to_raw(base: AffineConnection, twist: TwistFields) -> tuple[dict, dict]:
    christoffel = {f"{k},{i},{j}": to_dsl(v) for (k, i, j), v in sorted(base.entries().items())}
    tw: dict[str, Any] = {}
    for (k, l), tensor in sorted(twist.entries.items()):
        tw[f"{k},{l}"] = {f"{index_key(K)};{index_key(I)};{index_key(J)}": to_dsl(v)
                          for (K, I, J), v in sorted(tensor.items())}
    return christoffel, tw


def dumps_spec(raw: dict) -> str:
    return yaml.safe_dump(raw, sort_keys=False, default_flow_style=False, allow_unicode=True)
