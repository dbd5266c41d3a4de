"""Pointwise exterior algebra over R^n with real coefficients.

Basis k-vectors are indexed by strictly increasing tuples (multi-indices).
Every sign in the package goes through :func:`sort_sign` / :func:`merge_sign`.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegreeMismatch, DependentInput, DomainMismatch, RankDeficient

MultiIndex = tuple  # strictly increasing tuple of ints

RANK_THRESHOLD = 1e-10


def check_multi_index(index: Sequence[int], n: int) -> MultiIndex:
    index = tuple(int(i) for i in index)
    if any(a >= b for a, b in zip(index, index[1:])):
        raise ValueError(f"multi-index {index} is not strictly increasing")
    if index and (index[0] < 0 or index[-1] >= n):
        raise ValueError(f"multi-index {index} out of range for n={n}")
    return index


def sort_sign(seq: Sequence[int]) -> tuple[int, MultiIndex]:
    """Sign of the permutation sorting ``seq``; 0 if an index repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, ()
    inversions = 0
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                inversions += 1
    return (-1 if inversions % 2 else 1), tuple(sorted(seq))


def merge_sign(I: MultiIndex, J: MultiIndex) -> tuple[int, MultiIndex]:
    """``e_I ^ e_J = sign * e_K``; returns ``(0, ())`` when I and J overlap."""
    return sort_sign(tuple(I) + tuple(J))


def multi_indices(n: int, k: int) -> list[MultiIndex]:
    if k < 0 or k > n:
        return []
    return list(combinations(range(n), k))


def complement(I: MultiIndex, n: int) -> MultiIndex:
    s = set(I)
    return tuple(i for i in range(n) if i not in s)


def remove_at(I: MultiIndex, r: int) -> MultiIndex:
    return I[:r] + I[r + 1:]


@dataclass(frozen=True)
class KVector:
    """A k-vector in the exterior algebra of R^n (also used for k-covectors)."""

    n: int
    k: int
    coeffs: Mapping[MultiIndex, float]

    def __post_init__(self):
        clean = {}
        for key, val in self.coeffs.items():
            key = check_multi_index(key, self.n)
            if len(key) != self.k:
                raise DegreeMismatch(f"key {key} has degree {len(key)}, expected {self.k}")
            val = float(val)
            if val != 0.0:
                clean[key] = clean.get(key, 0.0) + val
        object.__setattr__(self, "coeffs", MappingProxyType(clean))

    @classmethod
    def zero(cls, n: int, k: int) -> "KVector":
        return cls(n, k, {})

    @classmethod
    def basis(cls, n: int, index: Sequence[int]) -> "KVector":
        index = tuple(index)
        return cls(n, len(index), {index: 1.0})

    @classmethod
    def scalar(cls, n: int, value: float) -> "KVector":
        return cls(n, 0, {(): value})

    @classmethod
    def vector(cls, components: Sequence[float]) -> "KVector":
        comps = list(components)
        return cls(len(comps), 1, {(i,): c for i, c in enumerate(comps)})

    @classmethod
    def from_array(cls, n: int, k: int, arr: Sequence[float]) -> "KVector":
        keys = multi_indices(n, k)
        if len(arr) != len(keys):
            raise DegreeMismatch(f"expected {len(keys)} coefficients, got {len(arr)}")
        return cls(n, k, dict(zip(keys, arr)))

    def to_array(self) -> np.ndarray:
        return np.array([self.coeffs.get(I, 0.0) for I in multi_indices(self.n, self.k)])

    def __getitem__(self, index) -> float:
        return self.coeffs.get(tuple(index), 0.0)

    def _same_space(self, other: "KVector"):
        if self.n != other.n:
            raise DomainMismatch(f"ambient dimensions differ: {self.n} vs {other.n}")
        if self.k != other.k:
            raise DegreeMismatch(f"degrees differ: {self.k} vs {other.k}")

    def __add__(self, other: "KVector") -> "KVector":
        self._same_space(other)
        out = dict(self.coeffs)
        for key, val in other.coeffs.items():
            out[key] = out.get(key, 0.0) + val
        return KVector(self.n, self.k, out)

    def __neg__(self) -> "KVector":
        return KVector(self.n, self.k, {key: -v for key, v in self.coeffs.items()})

    def __sub__(self, other: "KVector") -> "KVector":
        return self + (-other)

    def __mul__(self, c: float) -> "KVector":
        return KVector(self.n, self.k, {key: c * v for key, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "KVector") -> "KVector":
        return wedge_point(self, other)

    def max_abs(self) -> float:
        return max((abs(v) for v in self.coeffs.values()), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol


def wedge_point(u: KVector, v: KVector) -> KVector:
    if u.n != v.n:
        raise DomainMismatch(f"ambient dimensions differ: {u.n} vs {v.n}")
    out: dict[MultiIndex, float] = {}
    if u.k + v.k <= u.n:
        for I, a in u.coeffs.items():
            for J, b in v.coeffs.items():
                s, K = merge_sign(I, J)
                if s:
                    out[K] = out.get(K, 0.0) + s * a * b
    return KVector(u.n, u.k + v.k, out)


def wedge_all(vectors: Iterable[KVector], n: int) -> KVector:
    acc = KVector.scalar(n, 1.0)
    for v in vectors:
        acc = wedge_point(acc, v)
    return acc


def pair_covector(omega: KVector, v: KVector) -> float:
    """Natural pairing with phi^I(e_J) = delta_IJ (determinant convention)."""
    if omega.n != v.n:
        raise DomainMismatch(f"ambient dimensions differ: {omega.n} vs {v.n}")
    if omega.k != v.k:
        raise DegreeMismatch(f"degrees differ: {omega.k} vs {v.k}")
    return float(sum(a * v.coeffs.get(I, 0.0) for I, a in omega.coeffs.items()))


def numeric_rank(matrix, threshold: float = RANK_THRESHOLD) -> int:
    """Rank by Gaussian elimination with full pivoting.

    Pivots at or below ``threshold * max|matrix|`` count as zero.
    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.size == 0:
        return 0
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return 0
    cutoff = threshold * scale
    rows, cols = a.shape
    rank = 0
    for r in range(min(rows, cols)):
        sub = np.abs(a[r:, r:])
        p, q = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[p, q] <= cutoff:
            break
        p += r
        q += r
        a[[r, p]] = a[[p, r]]
        a[:, [r, q]] = a[:, [q, r]]
        a[r + 1:] -= np.outer(a[r + 1:, r] / a[r, r], a[r])
        rank += 1
    return rank


@dataclass(frozen=True)
class Subspace:
    """Span of the rows of ``basis`` (shape k x n)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def k(self) -> int:
        return self.basis.shape[0]


def plucker(W: Subspace) -> KVector:
    """The decomposable k-vector w_1 ^ ... ^ w_k representing W."""
    if numeric_rank(W.basis) < W.k:
        raise RankDeficient(f"basis of {W.k} vectors is linearly dependent")
    return wedge_all((KVector.vector(row) for row in W.basis), W.n)


def subspaces_intersect(W: Subspace, W2: Subspace, threshold: float = RANK_THRESHOLD) -> bool:
    """True iff dim(W ∩ W2) > 0, decided by whether the Plücker wedge vanishes."""
    w, w2 = plucker(W), plucker(W2)
    if w.n != w2.n:
        raise DomainMismatch(f"ambient dimensions differ: {w.n} vs {w2.n}")
    prod = wedge_point(w, w2)
    return prod.max_abs() <= threshold * max(w.max_abs() * w2.max_abs(), 1e-300)


def top_coefficient(x: KVector) -> float:
    """lambda with x = lambda * e_0 ^ ... ^ e_{n-1} (x of degree n)."""
    if x.k != x.n:
        raise DegreeMismatch(f"expected a top-degree vector, got degree {x.k} in dimension {x.n}")
    return x[tuple(range(x.n))]


def dual_separator(v_list: Sequence[KVector], n: int) -> KVector:
    """An (n-k)-vector u with u ^ v_1 != 0 and u ^ v_i = 0 for i >= 2.

    ``u`` is obtained through the isomorphism u -> lambda_u, where
    u ^ v = lambda_u(v) e_top: first a functional phi on the k-vectors with
    phi(v_1) = 1, phi(v_i) = 0 is found, then u with lambda_u = phi.
    """
    if not v_list:
        raise ValueError("need at least one k-vector")
    k = v_list[0].k
    for v in v_list:
        if v.n != n or v.k != k:
            raise DegreeMismatch("all inputs must share degree and ambient dimension")
    A = np.array([v.to_array() for v in v_list])
    if numeric_rank(A) < len(v_list):
        raise DependentInput("input k-vectors are linearly dependent")
    rhs = np.zeros(len(v_list))
    rhs[0] = 1.0
    phi = A.T @ np.linalg.solve(A @ A.T, rhs)
    keys = multi_indices(n, k)
    out = {}
    for I, phi_I in zip(keys, phi):
        J = complement(I, n)
        s, _ = merge_sign(J, I)
        out[J] = s * phi_I
    return KVector(n, n - k, out)
