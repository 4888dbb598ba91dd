"""Truncated arithmetic in O_F/p^N and O_E/p^N.

F is Q_p (p odd) and E = F(sqrt(eps)) is its unramified quadratic extension,
with eps the least quadratic non-residue mod p.  An element of O_E is stored
as a pair (a0, a1) meaning a0 + a1*sqrt(eps), both residues mod p^N.

Scalar classes are for readable one-off work.  The array helpers at the
bottom carry the hot loops: they act on int64 arrays whose last axis holds
the pair (a0, a1).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def least_nonresidue(p: int) -> int:
    for e in range(2, p):
        if pow(e, (p - 1) // 2, p) == p - 1:
            return e
    raise ValueError(f"no quadratic non-residue mod {p}")


@dataclass(frozen=True)
class FieldParams:
    """Prime, working precision and the non-square used to build E."""

    p: int
    N: int
    epsilon: int

    def __post_init__(self):
        if self.p % 2 == 0 or not is_prime(self.p):
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if self.N < 1:
            raise ValueError("precision must be at least 1")
        if pow(self.epsilon % self.p, (self.p - 1) // 2, self.p) != self.p - 1:
            raise ValueError(f"{self.epsilon} is a square mod {self.p}")

    @property
    def q(self) -> int:
        return self.p

    @property
    def modulus(self) -> int:
        return self.p ** self.N

    def at(self, N: int) -> "FieldParams":
        return FieldParams(self.p, N, self.epsilon)


def make_params(p: int, N: int) -> FieldParams:
    """FieldParams with eps chosen as the least non-residue mod p."""
    if p % 2 == 0 or not is_prime(p):
        raise ValueError(f"p must be an odd prime, got {p}")
    return FieldParams(p, N, least_nonresidue(p))


def vp(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of 0")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_frac(x: Fraction, p: int) -> int:
    x = Fraction(x)
    return vp(x.numerator, p) - vp(x.denominator, p)


def frac_to_residue(x: Fraction, p: int, N: int) -> int:
    """Image of a p-integral rational in Z/p^N."""
    x = Fraction(x)
    if x == 0:
        return 0
    if vp_frac(x, p) < 0:
        raise ValueError(f"{x} is not p-integral")
    P = p ** N
    return x.numerator * pow(x.denominator, -1, P) % P


@dataclass(frozen=True)
class Valuation:
    """A valuation read off at finite precision.

    When every coefficient vanishes mod p^N the true valuation is only known
    to be at least N; ``exact`` is then False and the value is N.
    """

    value: int
    exact: bool = True

    def __str__(self):
        return str(self.value) if self.exact else f">= {self.value}"


@dataclass(frozen=True)
class TruncatedScalar:
    """a0 + a1*sqrt(eps) modulo p^prec."""

    a0: int
    a1: int
    params: FieldParams
    prec: int = -1

    def __post_init__(self):
        prec = self.params.N if self.prec < 0 else self.prec
        if prec > self.params.N:
            raise ValueError("precision exceeds the working precision")
        P = self.params.p ** prec
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "a0", self.a0 % P)
        object.__setattr__(self, "a1", self.a1 % P)

    # construction helpers
    @classmethod
    def of(cls, params: FieldParams, a0: int, a1: int = 0, prec: int = -1):
        return cls(a0, a1, params, prec)

    def _coerce(self, other) -> "TruncatedScalar":
        if isinstance(other, TruncatedScalar):
            if other.params.p != self.params.p:
                raise ValueError("mixed primes")
            return other
        if isinstance(other, int):
            return TruncatedScalar(other, 0, self.params, self.prec)
        return NotImplemented

    def _meet(self, other: "TruncatedScalar") -> int:
        return min(self.prec, other.prec)

    @property
    def mod(self) -> int:
        return self.params.p ** self.prec

    def __add__(self, other):
        o = self._coerce(other)
        return TruncatedScalar(self.a0 + o.a0, self.a1 + o.a1, self.params, self._meet(o))

    __radd__ = __add__

    def __neg__(self):
        return TruncatedScalar(-self.a0, -self.a1, self.params, self.prec)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        e = self.params.epsilon
        return TruncatedScalar(
            self.a0 * o.a0 + e * self.a1 * o.a1,
            self.a0 * o.a1 + self.a1 * o.a0,
            self.params,
            self._meet(o),
        )

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int):
            other = TruncatedScalar(other, 0, self.params, self.prec)
        if not isinstance(other, TruncatedScalar):
            return NotImplemented
        P = self.params.p ** self._meet(other)
        return (self.a0 - other.a0) % P == 0 and (self.a1 - other.a1) % P == 0

    def __hash__(self):
        return hash((self.a0, self.a1, self.prec, self.params.p))

    def is_unit(self) -> bool:
        return self.prec > 0 and norm(self) % self.params.p != 0

    def inverse(self) -> "TruncatedScalar":
        if not self.is_unit():
            raise ZeroDivisionError(f"{self} is not a unit")
        n_inv = pow(norm(self), -1, self.mod)
        c = conj(self)
        return TruncatedScalar(c.a0 * n_inv, c.a1 * n_inv, self.params, self.prec)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def residue(self) -> tuple[int, int]:
        p = self.params.p
        return (self.a0 % p, self.a1 % p)

    def in_F(self) -> bool:
        return self.a1 == 0

    def reduce(self, prec: int) -> "TruncatedScalar":
        if prec > self.prec:
            raise ValueError("cannot raise precision by reduction")
        return TruncatedScalar(self.a0, self.a1, self.params, prec)

    def __repr__(self):
        return f"({self.a0} + {self.a1}*sqrt{self.params.epsilon} mod {self.params.p}^{self.prec})"


def conj(x: TruncatedScalar) -> TruncatedScalar:
    """Galois conjugation sqrt(eps) -> -sqrt(eps)."""
    return TruncatedScalar(x.a0, -x.a1, x.params, x.prec)


def norm(x: TruncatedScalar) -> int:
    """x * conj(x) as a residue mod p^prec."""
    return (x.a0 * x.a0 - x.params.epsilon * x.a1 * x.a1) % x.mod


def trace(x: TruncatedScalar) -> int:
    return (2 * x.a0) % x.mod


def valuation(x: TruncatedScalar) -> Valuation:
    p = x.params.p
    vals = [vp(c, p) for c in (x.a0, x.a1) if c != 0]
    if not vals:
        return Valuation(x.prec, exact=False)
    return Valuation(min(vals))


def _residue_field(p: int) -> Iterator[tuple[int, int]]:
    for a0 in range(p):
        for a1 in range(p):
            yield (a0, a1)


def _sqrt_F(t: int, p: int, N: int) -> int:
    """Square root of t = 1 mod p in Z/p^N congruent to 1 mod p."""
    if t % p != 1:
        raise ValueError("expected t = 1 mod p")
    P = p ** N
    r = 1
    # Newton steps double the precision each time
    k = 1
    while k < N:
        k = min(2 * k, N)
        Pk = p ** k
        r = (r - (r * r - t) * pow(2 * r, -1, Pk)) % Pk
    return r % P


def hensel_sqrt(u: TruncatedScalar) -> TruncatedScalar | None:
    """Square root of a unit of O_E/p^N, or None when none exists.

    A unit is a square exactly when its residue is a square in F_{q^2}, which
    is decided by whether its norm is a square mod p.  The root returned lifts
    the lexicographically least residue root.
    """
    if not u.is_unit():
        raise ValueError(f"{u} is not a unit")
    p, e = u.params.p, u.params.epsilon
    if pow(norm(u) % p, (p - 1) // 2, p) != 1:
        return None
    r0, r1 = u.residue()
    root = None
    for a0, a1 in _residue_field(p):
        if ((a0 * a0 + e * a1 * a1 - r0) % p, (2 * a0 * a1 - r1) % p) == (0, 0):
            root = (a0, a1)
            break
    assert root is not None, "norm test and residue search disagree"
    r = TruncatedScalar(root[0], root[1], u.params, u.prec)
    k = 1
    while k < u.prec:
        k = min(2 * k, u.prec)
        uk, rk = u.reduce(k), TruncatedScalar(r.a0, r.a1, u.params, k)
        rk = rk - (rk * rk - uk) * (2 * rk).inverse()
        r = TruncatedScalar(rk.a0, rk.a1, u.params, u.prec)
    return r


def solve_norm(t: TruncatedScalar | int, params: FieldParams | None = None, level: int = 0) -> TruncatedScalar:
    """A unit a of O_E with a * conj(a) = t for a unit t of O_F.

    If ``level`` >= 1 and t = 1 mod p^level, the answer also lies in
    1 + p^level O_E.
    """
    if isinstance(t, int):
        if params is None:
            raise ValueError("params needed for an integer norm target")
        t = TruncatedScalar(t, 0, params)
    par, p, N = t.params, t.params.p, t.prec
    if not t.in_F():
        raise ValueError("norm target must lie in O_F")
    if t.a0 % p == 0:
        raise ValueError("norm target must be a unit")
    if level >= 1:
        if (t.a0 - 1) % p ** min(level, N) != 0:
            raise ValueError(f"target is not 1 mod p^{level}")
        return TruncatedScalar(_sqrt_F(t.a0, p, N), 0, par, N)
    e = par.epsilon
    for a0, a1 in _residue_field(p):
        if (a0 * a0 - e * a1 * a1 - t.a0) % p == 0:
            break
    else:  # pragma: no cover - the norm map on residue fields is onto
        raise AssertionError("residue norm map not surjective")
    a = TruncatedScalar(a0, a1, par, N)
    # scale by a square root of the (1 mod p) ratio to fix higher digits
    ratio = t.a0 * pow(norm(a), -1, p ** N) % p ** N
    return a * _sqrt_F(ratio, p, N)


def norm_one_array(params: FieldParams, d: int) -> np.ndarray:
    """All x in O_E/p^d with x * conj(x) = 1 mod p^d, as an (m, 2) array."""
    if d < 1:
        raise ValueError("level must be positive")
    p, e = params.p, params.epsilon
    res = np.array(list(_residue_field(p)), dtype=np.int64)
    cur = res[(res[:, 0] ** 2 - e * res[:, 1] ** 2) % p == 1]
    for n in range(1, d):
        Pn, P1 = p ** n, p ** (n + 1)
        cand = (cur[:, None, :] + Pn * res[None, :, :]).reshape(-1, 2) % P1
        nm = (cand[:, 0] ** 2 - e * cand[:, 1] ** 2) % P1
        cur = cand[nm == 1]
    return cur


def enumerate_norm_one(params: FieldParams, d: int) -> list[TruncatedScalar]:
    """Coset representatives of E^1 modulo E^1 meet (1 + p^d O_E).

    Every representative has norm exactly 1 at the working precision.
    """
    if d > params.N:
        raise ValueError("level exceeds working precision")
    reps = []
    for a0, a1 in norm_one_array(params, d):
        x = TruncatedScalar(int(a0), int(a1), params)
        ratio = pow(norm(x), -1, params.modulus)
        reps.append(x * _sqrt_F(ratio, params.p, params.N))
    return reps


@dataclass(frozen=True)
class LaurentScalar:
    """pi^(-shift) * mantissa, with pi = p.

    The value is known modulo p^(mantissa.prec - shift).
    """

    shift: int
    mantissa: TruncatedScalar

    @property
    def params(self) -> FieldParams:
        return self.mantissa.params

    @property
    def abs_prec(self) -> int:
        return self.mantissa.prec - self.shift

    @classmethod
    def from_fraction(cls, x: Fraction, params: FieldParams, sqrt_part: bool = False) -> "LaurentScalar":
        """Embed a rational (times sqrt(eps) when ``sqrt_part``) at full mantissa precision."""
        x = Fraction(x)
        p = params.p
        shift = 0 if x == 0 else max(0, -vp_frac(x, p))
        c = frac_to_residue(x * p ** shift, p, params.N)
        m = TruncatedScalar(0, c, params) if sqrt_part else TruncatedScalar(c, 0, params)
        return cls(shift, m)

    def _aligned(self, other: "LaurentScalar") -> tuple[int, TruncatedScalar, TruncatedScalar]:
        s = max(self.shift, other.shift)
        p = self.params.p
        a = self.mantissa * p ** (s - self.shift)
        b = other.mantissa * p ** (s - other.shift)
        return s, a, b

    def __add__(self, other: "LaurentScalar") -> "LaurentScalar":
        s, a, b = self._aligned(other)
        return LaurentScalar(s, a + b)

    def __neg__(self):
        return LaurentScalar(self.shift, -self.mantissa)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            other = LaurentScalar(0, TruncatedScalar(other, 0, self.params))
        return LaurentScalar(self.shift + other.shift, self.mantissa * other.mantissa)

    __rmul__ = __mul__

    def as_truncated(self) -> TruncatedScalar:
        """The value as an integral element, at precision mantissa.prec - shift."""
        p, s = self.params.p, self.shift
        m = self.mantissa
        if s == 0:
            return m
        if m.a0 % p ** s or m.a1 % p ** s:
            raise ValueError("value is not integral")
        return TruncatedScalar(m.a0 // p ** s, m.a1 // p ** s, self.params, m.prec - s)

    def valuation(self) -> Valuation:
        v = valuation(self.mantissa)
        return Valuation(v.value - self.shift, v.exact)


# ---------------------------------------------------------------------------
# array kernels: last axis is (a0, a1)

def e_mul(x: np.ndarray, y: np.ndarray, eps: int, P: int) -> np.ndarray:
    x0, x1 = x[..., 0], x[..., 1]
    y0, y1 = y[..., 0], y[..., 1]
    return np.stack(((x0 * y0 + eps * (x1 * y1)) % P, (x0 * y1 + x1 * y0) % P), axis=-1)


def e_conj(x: np.ndarray, P: int) -> np.ndarray:
    out = x.copy()
    out[..., 1] = (-out[..., 1]) % P
    return out


def e_norm(x: np.ndarray, eps: int, P: int) -> np.ndarray:
    return (x[..., 0] * x[..., 0] - eps * (x[..., 1] * x[..., 1])) % P


@lru_cache(maxsize=None)
def inverse_table(P: int) -> np.ndarray:
    """t[x] = x^-1 mod P for units x, 0 elsewhere."""
    t = np.zeros(P, dtype=np.int64)
    for x in range(1, P):
        try:
            t[x] = pow(x, -1, P)
        except ValueError:
            pass
    return t


def e_inv(x: np.ndarray, eps: int, P: int) -> np.ndarray:
    """Inverse of units, componentwise over the leading axes."""
    ninv = inverse_table(P)[e_norm(x, eps, P)]
    return (e_conj(x, P) * ninv[..., None]) % P


def e_val_ge(x: np.ndarray, b: int, p: int, level: int) -> np.ndarray:
    """Whether each entry has valuation >= b, read at precision ``level``."""
    if b <= 0:
        return np.ones(x.shape[:-1], dtype=bool)
    m = p ** min(b, level)
    return (x[..., 0] % m == 0) & (x[..., 1] % m == 0)


def sqrt_one_mod_p(t: np.ndarray, p: int, N: int) -> np.ndarray:
    """Square roots r = 1 mod p of integers t = 1 mod p, modulo p^N."""
    if np.any(t % p != 1):
        raise ValueError("expected values = 1 mod p")
    P = p ** N
    inv = inverse_table(P)
    r = np.ones_like(t)
    for _ in range(N):
        r = (r - (r * r - t) % P * inv[(2 * r) % P]) % P
    return r


def solve_norm_array(t: np.ndarray, params: FieldParams, N: int) -> np.ndarray:
    """For units t of Z/p^N, elements a of O_E/p^N with a conj(a) = t."""
    p, e, P = params.p, params.epsilon, params.p ** N
    res = np.array(list(_residue_field(p)), dtype=np.int64)
    nres = (res[:, 0] ** 2 - e * res[:, 1] ** 2) % p
    pick = np.zeros(p, dtype=np.int64)
    for i in range(len(res) - 1, -1, -1):
        pick[nres[i]] = i
    a = res[pick[t % p]]
    ratio = (t % P) * inverse_table(P)[e_norm(a, e, P)] % P
    s = sqrt_one_mod_p(ratio, p, N)
    return (a * s[:, None]) % P
