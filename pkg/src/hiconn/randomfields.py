"""Seeded random generators for polynomial fields, used by tests and suites."""
from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

from .multilinear import multi_indices
from .scalar import Chart, ScalarField, _add, _const, _coord, _mul


def random_polynomial(chart: Chart, rng: np.random.Generator, degree: int = 2, scale: float = 1.0) -> ScalarField:
    """Dense polynomial of total degree <= ``degree`` with coefficients in [-scale, scale]."""
    terms = []
    for d in range(degree + 1):
        for mono in combinations_with_replacement(range(chart.dim), d):
            c = rng.uniform(-scale, scale)
            terms.append(_mul([_const(c), *(_coord(i, chart.dim) for i in mono)]))
    return ScalarField(chart, _add(terms))


def random_mvf(chart: Chart, k: int, rng: np.random.Generator, degree: int = 2, density: float = 1.0):
    from .exterior import MultiVectorField
    return MultiVectorField(chart, k, _random_coeffs(chart, k, rng, degree, density), check=False)


def random_form(chart: Chart, l: int, rng: np.random.Generator, degree: int = 2, density: float = 1.0):
    from .exterior import DifferentialForm
    return DifferentialForm(chart, l, _random_coeffs(chart, l, rng, degree, density), check=False)


def _random_coeffs(chart, k, rng, degree, density):
    out = {}
    for I in multi_indices(chart.dim, k):
        if density >= 1.0 or rng.uniform() < density:
            out[I] = random_polynomial(chart, rng, degree)
    return out


def random_decomposable(chart: Chart, k: int, rng: np.random.Generator, degree: int = 1):
    """Wedge of k random vector fields."""
    from .exterior import MultiVectorField, wedge_all
    if k == 0:
        return MultiVectorField.scalar_field(random_polynomial(chart, rng, degree))
    return wedge_all(chart, [random_mvf(chart, 1, rng, degree) for _ in range(k)])


def random_affine(chart: Chart, rng: np.random.Generator, symmetric: bool = False, degree: int = 1):
    from .connection import AffineConnection
    n = chart.dim
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if symmetric and j < i:
                    gamma[k][i][j] = gamma[k][j][i]
                else:
                    gamma[k][i][j] = random_polynomial(chart, rng, degree)
    return AffineConnection(chart, gamma)


def random_twist(chart: Chart, rng: np.random.Generator, degree: int = 1, max_degree: int | None = None):
    """Random twist tensors for every admissible (k, l) except (1, 1)."""
    from .connection import TwistFields
    n = chart.dim
    top = n if max_degree is None else max_degree
    entries = {}
    for k in range(1, top + 1):
        for l in range(1, top + 1):
            if (k, l) == (1, 1) or k + l - 1 > n:
                continue
            tensor = {}
            for K in multi_indices(n, k + l - 1):
                for I in multi_indices(n, k):
                    for J in multi_indices(n, l):
                        tensor[(K, I, J)] = random_polynomial(chart, rng, degree)
            entries[(k, l)] = tensor
    return TwistFields(chart, entries)


def random_metric(chart: Chart, rng: np.random.Generator, degree: int = 1, scale: float = 0.2):
    """Symmetric polynomial metric, diagonally dominant on [-1, 1]^n."""
    from .bilinear import Metric
    n = chart.dim
    g = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            p = random_polynomial(chart, rng, degree, scale=scale)
            g[i][j] = g[j][i] = p + 2.0 if i == j else p
    return Metric(chart, g)
