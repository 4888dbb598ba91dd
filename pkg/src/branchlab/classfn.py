"""Exact class functions with values in cyclotomic integers.

A character value at a point is a short sum of roots of unity.  Evaluators
return these as ``Terms``: flat arrays (row, exponent, coefficient) with the
exponent read modulo a root order M, so zeta_M^exponent.  Nothing is ever
tabulated over a whole group.  Sums over a group stream in chunks; each chunk
is turned into per-point vectors of root counts, repeated vectors are merged
with their multiplicities, and only the distinct ones are paired.  Every step
is integer arithmetic; the final reduction is modulo the cyclotomic
polynomial.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .groups import (
    INF,
    KeyTable,
    SubgroupSpec,
    coset_labels,
    encode,
    identity_array,
    lift_array,
    mat_inv_unitary,
    mat_mul,
    principal_congruence,
    quotient_enumerate,
)
from .scalars import FieldParams

CHUNK = 40_000


# ---------------------------------------------------------------------------
# cyclotomic arithmetic

@lru_cache(maxsize=None)
def cyclotomic_poly(m: int) -> tuple[int, ...]:
    """Coefficients of Phi_m, constant term first."""
    num = [-1] + [0] * (m - 1) + [1]  # x^m - 1
    for d in range(1, m):
        if m % d == 0:
            num = _poly_div_exact(num, list(cyclotomic_poly(d)))
    return tuple(num)


def _poly_div_exact(a: list[int], b: list[int]) -> list[int]:
    a = a[:]
    out = [0] * (len(a) - len(b) + 1)
    lead = b[-1]
    for i in range(len(out) - 1, -1, -1):
        c = a[i + len(b) - 1] // lead
        out[i] = c
        for j, bj in enumerate(b):
            a[i + j] -= c * bj
    assert not any(a), "inexact polynomial division"
    return out


def euler_phi(m: int) -> int:
    return len(cyclotomic_poly(m)) - 1


@lru_cache(maxsize=None)
def reduction_matrix(m: int) -> np.ndarray:
    """R[k] = coefficients of x^k mod Phi_m in the power basis."""
    phi = cyclotomic_poly(m)
    n = len(phi) - 1
    R = np.zeros((m, n), dtype=np.int64)
    cur = [0] * n
    if n:
        cur[0] = 1
    for k in range(m):
        R[k] = cur
        # multiply by x and reduce
        top = cur[-1] if n else 0
        cur = [0] + cur[:-1]
        for j in range(n):
            cur[j] -= top * phi[j]
    R.setflags(write=False)
    return R


@dataclass(frozen=True)
class CyclotomicValue:
    """An element of Z[zeta_m] in the basis 1, zeta, ..., zeta^(phi(m)-1)."""

    order: int
    coeffs: tuple

    @classmethod
    def from_counts(cls, counts: Sequence[int], m: int) -> "CyclotomicValue":
        v = np.asarray(counts, dtype=np.int64) @ reduction_matrix(m) if m > 1 else np.array([int(np.sum(counts))])
        return cls(m, tuple(int(x) for x in v))

    @classmethod
    def root(cls, k: int, m: int) -> "CyclotomicValue":
        c = [0] * m
        c[k % m] = 1
        return cls.from_counts(c, m)

    @classmethod
    def integer(cls, n: int) -> "CyclotomicValue":
        return cls(1, (int(n),))

    def counts(self, m: int) -> np.ndarray:
        """A root-count vector of length m representing the value (m a multiple of order)."""
        if m % self.order:
            raise ValueError("order does not divide m")
        out = np.zeros(m, dtype=np.int64)
        step = m // self.order
        for k, c in enumerate(self.coeffs):
            out[(k * step) % m] += c
        return out

    def _common(self, other: "CyclotomicValue") -> int:
        return self.order * other.order // math.gcd(self.order, other.order)

    def __add__(self, other):
        if isinstance(other, int):
            other = CyclotomicValue.integer(other)
        m = self._common(other)
        return CyclotomicValue.from_counts(self.counts(m) + other.counts(m), m)

    __radd__ = __add__

    def __neg__(self):
        return CyclotomicValue(self.order, tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        return self + (-other if isinstance(other, CyclotomicValue) else CyclotomicValue.integer(-other))

    def __mul__(self, other):
        if isinstance(other, int):
            return CyclotomicValue(self.order, tuple(other * c for c in self.coeffs))
        m = self._common(other)
        a, b = self.counts(m), other.counts(m)
        out = np.zeros(m, dtype=np.int64)
        for i in np.nonzero(a)[0]:
            out += a[i] * np.roll(b, i)
        return CyclotomicValue.from_counts(out, m)

    __rmul__ = __mul__

    def conj(self) -> "CyclotomicValue":
        m = self.order
        c = self.counts(m)
        return CyclotomicValue.from_counts(np.roll(c[::-1], 1), m)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def to_int(self) -> int:
        if not self.is_rational():
            raise ValueError(f"{self} is not a rational integer")
        return self.coeffs[0] if self.coeffs else 0

    def __eq__(self, other):
        if isinstance(other, int):
            other = CyclotomicValue.integer(other)
        if not isinstance(other, CyclotomicValue):
            return NotImplemented
        return not any((self - other).coeffs)

    def __hash__(self):
        return hash(self.coeffs) if self.order == 1 else hash((self.order, self.coeffs))

    def __repr__(self):
        if self.is_rational():
            return str(self.to_int())
        terms = [f"{c}*z{self.order}^{k}" for k, c in enumerate(self.coeffs) if c]
        return " + ".join(terms)


# ---------------------------------------------------------------------------
# per-point values

@dataclass
class Terms:
    """Values at n points: the value at point i is the sum of coef * zeta_M^exp over rows == i."""

    n: int
    rows: np.ndarray
    exps: np.ndarray
    coefs: np.ndarray
    M: int

    @classmethod
    def single(cls, exps: np.ndarray, M: int, coefs: np.ndarray | None = None) -> "Terms":
        n = len(exps)
        return cls(n, np.arange(n), np.asarray(exps, dtype=np.int64) % M,
                   np.ones(n, dtype=np.int64) if coefs is None else np.asarray(coefs, dtype=np.int64), M)

    @classmethod
    def empty(cls, n: int, M: int = 1) -> "Terms":
        z = np.zeros(0, dtype=np.int64)
        return cls(n, z, z, z, M)

    def at_order(self, M: int) -> "Terms":
        if M % self.M:
            raise ValueError("root order must be a multiple")
        return Terms(self.n, self.rows, self.exps * (M // self.M), self.coefs, M)

    def times_exps(self, exps: np.ndarray, M: int) -> "Terms":
        """Multiply point i by zeta_M^exps[i]."""
        L = math.lcm(self.M, M)
        t = self.at_order(L)
        return Terms(self.n, t.rows, (t.exps + exps[t.rows] * (L // M)) % L, t.coefs, L)

    def scaled(self, c: int) -> "Terms":
        return Terms(self.n, self.rows, self.exps, self.coefs * c, self.M)

    @staticmethod
    def concat(parts: Sequence["Terms"], n: int) -> "Terms":
        """Sum of several Terms over the same n points."""
        if not parts:
            return Terms.empty(n)
        M = 1
        for t in parts:
            M = math.lcm(M, t.M)
        parts = [t.at_order(M) for t in parts]
        return Terms(n, np.concatenate([t.rows for t in parts]), np.concatenate([t.exps for t in parts]),
                     np.concatenate([t.coefs for t in parts]), M)

    @staticmethod
    def scatter(t: "Terms", where: np.ndarray, n: int) -> "Terms":
        """Place values computed on a subset (indices ``where``) into n points; zero elsewhere."""
        return Terms(n, where[t.rows], t.exps, t.coefs, t.M)

    def dense(self, M: int | None = None) -> np.ndarray:
        """(n, M) array of root counts."""
        M = M or self.M
        t = self.at_order(M) if M != self.M else self
        out = np.zeros(self.n * M, dtype=np.int64)
        idx = t.rows * M + t.exps
        for c in np.unique(t.coefs):
            sel = t.coefs == c
            if c:
                out += c * np.bincount(idx[sel], minlength=self.n * M)
        return out.reshape(self.n, M)

    def value(self, i: int) -> CyclotomicValue:
        sel = self.rows == i
        c = np.zeros(self.M, dtype=np.int64)
        np.add.at(c, self.exps[sel], self.coefs[sel])
        return CyclotomicValue.from_counts(c, self.M)


Evaluator = Callable[[np.ndarray, int], Terms]


@dataclass
class ClassFunction:
    """A function on a subgroup of K given by a formula.

    ``fn(A, level)`` takes members of ``domain`` known mod p^level and returns
    their values.  ``level`` below is the least precision the formula needs.
    """

    name: str
    domain: SubgroupSpec
    params: FieldParams
    fn: Evaluator
    level: int = 1
    M: int = 1
    _degree: int | None = field(default=None, repr=False)

    def __call__(self, A: np.ndarray, level: int) -> Terms:
        if level < self.level:
            raise ValueError(f"{self.name} needs precision {self.level}, got {level}")
        if len(A) == 0:
            return Terms.empty(0, self.M)
        return self.fn(A, level)

    def evaluate(self, A: np.ndarray, level: int) -> Terms:
        parts = []
        for s in range(0, len(A), CHUNK):
            t = self(A[s:s + CHUNK], level)
            parts.append(Terms(t.n, t.rows + s, t.exps, t.coefs, t.M))
        return Terms.concat(parts, len(A))

    def value_at(self, A: np.ndarray, level: int) -> CyclotomicValue:
        return self(A[None], level).value(0)

    @property
    def degree(self) -> int:
        if self._degree is None:
            lv = max(self.level, 1)
            self._degree = self.value_at(identity_array(1)[0], lv).to_int()
        return self._degree


def trivial_character(domain: SubgroupSpec, params: FieldParams) -> ClassFunction:
    return ClassFunction("1", domain, params, lambda A, lv: Terms.single(np.zeros(len(A), np.int64), 1), 1, 1, 1)


def product_character(f: ClassFunction, g: ClassFunction, name: str | None = None) -> ClassFunction:
    """Pointwise product of a character with a one-dimensional one."""

    def fn(A, lv):
        a, b = f(A, lv), g(A, lv)
        if not np.array_equal(b.rows, np.arange(len(A))) or np.any(b.coefs != 1):
            raise ValueError("second factor must be one-dimensional")
        return a.times_exps(b.exps, b.M)

    return ClassFunction(name or f"{f.name}*{g.name}", f.domain, f.params, fn, max(f.level, g.level), math.lcm(f.M, g.M))


# ---------------------------------------------------------------------------
# streamed sums

def _row_view(D: np.ndarray) -> np.ndarray:
    D = np.ascontiguousarray(D)
    return D.view(np.dtype((np.void, D.dtype.itemsize * D.shape[1]))).ravel()


def _distinct_rows(D: np.ndarray, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    v = _row_view(D)
    _, first, inv = np.unique(v, return_index=True, return_inverse=True)
    w = np.ones(len(D), dtype=np.int64) if weights is None else weights
    counts = np.zeros(len(first), dtype=np.int64)
    np.add.at(counts, inv.ravel(), w)
    return D[first], counts


class _PairAccumulator:
    """Collects distinct (value1, value2) count vectors with multiplicities."""

    def __init__(self):
        self.blocks: list[tuple[np.ndarray, np.ndarray]] = []
        self.M = 1
        self.points = 0

    def add(self, t1: Terms, t2: Terms):
        L = math.lcm(t1.M, t2.M, self.M)
        if L != self.M:
            self.blocks = [(self._rescale(D, self.M, L), c) for D, c in self.blocks]
            self.M = L
        D = np.concatenate([t1.dense(L), t2.dense(L)], axis=1).astype(np.int32)
        self.blocks.append(_distinct_rows(D))
        self.points += t1.n

    @staticmethod
    def _rescale(D: np.ndarray, M: int, L: int) -> np.ndarray:
        n = D.shape[0]
        out = np.zeros((n, 2 * L), dtype=D.dtype)
        s = L // M
        out[:, 0:L:s] = D[:, :M]
        out[:, L::s] = D[:, M:]
        return out

    def pairing(self) -> CyclotomicValue:
        """sum over points of value1 * conj(value2)."""
        M = self.M
        if not self.blocks:
            return CyclotomicValue.integer(0)
        D = np.concatenate([b for b, _ in self.blocks])
        cnt = np.concatenate([c for _, c in self.blocks])
        D, cnt = _distinct_rows(D, cnt)
        D = D.astype(np.int64)
        D1, D2 = D[:, :M], D[:, M:]
        u1, a1 = np.nonzero(D1)
        u2, b2 = np.nonzero(D2)
        v1, v2 = D1[u1, a1], D2[u2, b2]
        U = len(D)
        c2 = np.bincount(u2, minlength=U)
        start2 = np.concatenate([[0], np.cumsum(c2)[:-1]])
        reps = c2[u1]
        total = int(reps.sum())
        S = np.zeros(M, dtype=np.int64)
        if total:
            i = np.repeat(np.arange(len(u1)), reps)
            first = np.repeat(np.cumsum(reps) - reps, reps)
            j = start2[u1[i]] + (np.arange(total) - first)
            k = (a1[i] - b2[j]) % M
            w = v1[i] * v2[j] * cnt[u1[i]]
            np.add.at(S, k, w)
        return CyclotomicValue.from_counts(S, M)


def _chunks(n: int, size: int = CHUNK):
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


def _map_chunks(func, n: int, jobs: int = 1):
    sl = list(_chunks(n))
    if jobs <= 1 or len(sl) == 1:
        return [func(s) for s in sl]
    with ThreadPoolExecutor(jobs) as ex:
        return list(ex.map(func, sl))


def pairing_sum(f1: ClassFunction, f2: ClassFunction, A: np.ndarray, level: int, jobs: int = 1) -> CyclotomicValue:
    """sum_{a in A} f1(a) conj(f2(a))."""
    acc = _PairAccumulator()
    for t1, t2 in _map_chunks(lambda s: (f1(A[s], level), f2(A[s], level)), len(A), jobs):
        acc.add(t1, t2)
    return acc.pairing()


def inner_product(f1: ClassFunction, f2: ClassFunction, level: int | None = None, over: SubgroupSpec | None = None,
                  jobs: int = 1) -> Fraction:
    """<f1, f2> over a subgroup (default the common domain) at the given precision."""
    over = over or f1.domain
    level = level or max(f1.level, f2.level)
    A = quotient_enumerate(over, level, f1.params)
    s = pairing_sum(f1, f2, A, level, jobs)
    if not s.is_rational():
        raise ArithmeticError(f"inner product is not rational: {s}")
    return Fraction(s.to_int(), len(A))


def value_sum(f: ClassFunction, A: np.ndarray, level: int, jobs: int = 1) -> CyclotomicValue:
    total = np.zeros(1, dtype=np.int64)
    M = 1
    for t in _map_chunks(lambda s: f(A[s], level), len(A), jobs):
        if t.M != M:
            L = math.lcm(t.M, M)
            nt = np.zeros(L, dtype=np.int64)
            nt[:: L // M] = total
            total, M = nt, L
        tt = t.at_order(M)
        c = np.zeros(M, dtype=np.int64)
        np.add.at(c, tt.exps, tt.coefs)
        total += c
    return CyclotomicValue.from_counts(total, M)


def fixed_dim(f: ClassFunction, H: SubgroupSpec, level: int | None = None, jobs: int = 1) -> Fraction:
    """Dimension of the H-fixed vectors: <Res_H f, 1>_H."""
    level = level or f.level
    A = quotient_enumerate(H, level, f.params)
    s = value_sum(f, A, level, jobs)
    if not s.is_rational():
        raise ArithmeticError("fixed-vector count is not rational")
    return Fraction(s.to_int(), len(A))


def equal_pointwise(f1: ClassFunction, f2: ClassFunction, A: np.ndarray, level: int, jobs: int = 1) -> bool:
    for t1, t2 in _map_chunks(lambda s: (f1(A[s], level), f2(A[s], level)), len(A), jobs):
        M = math.lcm(t1.M, t2.M)
        diff = t1.dense(M) - t2.dense(M)
        rows, _ = _distinct_rows(diff)
        red = rows @ reduction_matrix(M) if M > 1 else rows.sum(axis=1, keepdims=True)
        if np.any(red):
            return False
    return True


def depth_of(f: ClassFunction, level: int, jobs: int = 1) -> int | None:
    """Least d >= 0 with f trivial on K_{d+1}; None if not visible below ``level``."""
    deg = f.degree
    for d in range(0, level - 1):
        if fixed_dim(f, principal_congruence(d + 1), level, jobs) == deg:
            return d
    return None


# ---------------------------------------------------------------------------
# induction and Mackey sums

def induce(f: ClassFunction, ambient: SubgroupSpec, reps: np.ndarray | None = None, name: str | None = None) -> ClassFunction:
    """Ind from f.domain to ambient via sum over x of f(x g x^-1), x running over H\\ambient."""
    params = f.params
    if reps is None:
        m = max(1, f.domain.depth_level())
        if m >= INF:
            raise ValueError("domain contains no congruence subgroup")
        _, _, r = coset_labels(f.domain, ambient, m, params)
        reps = lift_array(r, m, params.N, params)
    reps = np.asarray(reps)
    H, eps = f.domain, params.epsilon

    def fn(A, lv):
        P = params.p ** lv
        X = reps % P
        Xi = mat_inv_unitary(X, P)
        parts = []
        for x, xi in zip(X, Xi):
            y = mat_mul(mat_mul(x[None], A, eps, P), xi[None], eps, P)
            mask = H.contains(y, lv, params)
            where = np.nonzero(mask)[0]
            if len(where):
                parts.append(Terms.scatter(f(y[where], lv), where, len(A)))
        return Terms.concat(parts, len(A)) if parts else Terms.empty(len(A), f.M)

    out = ClassFunction(name or f"Ind({f.name})", ambient, params, fn, f.level, f.M)
    out.reps = reps  # type: ignore[attr-defined]
    return out


def conjugate_function(f: ClassFunction, x: np.ndarray, domain: SubgroupSpec, name: str | None = None) -> ClassFunction:
    """h -> f(x^-1 h x) on ``domain`` (which should be x f.domain x^-1 met with whatever)."""
    params, eps = f.params, f.params.epsilon

    def fn(A, lv):
        P = params.p ** lv
        xx = x % P
        y = mat_mul(mat_mul(mat_inv_unitary(xx, P)[None], A, eps, P), xx[None], eps, P)
        return f(y, lv)

    return ClassFunction(name or f"{f.name}^x", domain, params, fn, f.level, f.M)


def double_coset_reps(H1: SubgroupSpec, H2: SubgroupSpec, ambient: SubgroupSpec, params: FieldParams, level: int) -> np.ndarray:
    """Representatives of H1 \\ ambient / H2 computed on the quotient at ``level``."""
    P, eps = params.p ** level, params.epsilon
    G, lab, reps = coset_labels(H2, ambient, level, params, side="left")
    tab = KeyTable(encode(G, P), lab)
    H1el = quotient_enumerate(H1, level, params)
    seen = np.zeros(len(reps), dtype=bool)
    out = []
    for i, r in enumerate(reps):
        if seen[i]:
            continue
        _, orb = tab.find(encode(mat_mul(H1el, r[None], eps, P), P))
        seen[orb] = True
        out.append(r)
    return lift_array(np.array(out), level, params.N, params)


def mackey_pairing(f1: ClassFunction, f2: ClassFunction, reps: np.ndarray, level: int, jobs: int = 1) -> Fraction:
    """<Ind f1, Ind f2>_K as a sum over double coset reps x of
    <f1, f2^x> on H1 meet x H2 x^-1, where f2^x(h) = f2(x^-1 h x)."""
    params, eps = f1.params, f1.params.epsilon
    P = params.p ** level
    H1el = quotient_enumerate(f1.domain, level, params)
    total = Fraction(0)
    for x in np.asarray(reps):
        xx = x % P
        y = mat_mul(mat_mul(mat_inv_unitary(xx, P)[None], H1el, eps, P), xx[None], eps, P)
        inter = H1el[f2.domain.contains(y, level, params)]
        g2 = conjugate_function(f2, x, f1.domain)
        s = pairing_sum(f1, g2, inter, level, jobs)
        if not s.is_rational():
            raise ArithmeticError("Mackey term is not rational")
        total += Fraction(s.to_int(), len(inter))
    return total


def frobenius_pairing(f: ClassFunction, g: ClassFunction, level: int, jobs: int = 1) -> Fraction:
    """<Ind_H f, g>_K computed as <f, Res_H g>_H."""
    A = quotient_enumerate(f.domain, level, f.params)
    s = pairing_sum(f, g, A, level, jobs)
    return Fraction(s.to_int(), len(A))
