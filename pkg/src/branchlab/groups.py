"""The unitary group U(1,1) preserving w = [[0,1],[1,0]] and its finite quotients.

Elements of K = U(1,1)(O_F) modulo K_N are int64 arrays of shape (..., 2, 2, 2):
row, column, then the (a0, a1) pair of the entry.  Subgroups of K are described
by membership tests (``Pattern``, ``Torus``, ``Product``) and enumerated by
lifting one level at a time, each unitary element mod p^n having exactly q^4
unitary lifts mod p^(n+1).
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .scalars import (
    FieldParams,
    TruncatedScalar,
    e_conj,
    e_inv,
    e_mul,
    e_norm,
    e_val_ge,
    frac_to_residue,
    vp_frac,
)

INF = 10 ** 6
DEFAULT_CAP = 5_000_000
_cap = DEFAULT_CAP


class CapExceeded(RuntimeError):
    """An enumeration would exceed the configured element budget."""


class NotInSubgroup(ValueError):
    pass


# ---------------------------------------------------------------------------
# array kernels

def mat_mul(A: np.ndarray, B: np.ndarray, eps: int, P: int) -> np.ndarray:
    A0, A1 = A[..., 0], A[..., 1]
    B0, B1 = B[..., 0], B[..., 1]
    C0 = (A0 @ B0 + eps * (A1 @ B1)) % P
    C1 = (A0 @ B1 + A1 @ B0) % P
    return np.stack((C0, C1), axis=-1)


def mat_inv_unitary(A: np.ndarray, P: int) -> np.ndarray:
    """Inverse of a unitary matrix: w * conj(A)^T * w = [[d', b'], [c', a']]."""
    out = np.empty_like(A)
    out[..., 0, 0, :] = A[..., 1, 1, :]
    out[..., 0, 1, :] = A[..., 0, 1, :]
    out[..., 1, 0, :] = A[..., 1, 0, :]
    out[..., 1, 1, :] = A[..., 0, 0, :]
    return e_conj(out, P)


def hermitian_defect(A: np.ndarray, eps: int, P: int) -> np.ndarray:
    """conj(A)^T w A - w."""
    Ab = e_conj(A, P)
    AbT = np.swapaxes(Ab, -3, -2)
    wA = A[..., ::-1, :, :]
    H = mat_mul(AbT, wA, eps, P)
    H[..., 0, 1, 0] -= 1
    H[..., 1, 0, 0] -= 1
    return H % P


def is_unitary_array(A: np.ndarray, eps: int, P: int) -> np.ndarray:
    return ~np.any(hermitian_defect(A, eps, P) != 0, axis=(-3, -2, -1))


def identity_array(n: int = 1) -> np.ndarray:
    out = np.zeros((n, 2, 2, 2), dtype=np.int64)
    out[:, 0, 0, 0] = 1
    out[:, 1, 1, 0] = 1
    return out


def encode(A: np.ndarray, P: int) -> np.ndarray:
    """Injective int64 key of each residue matrix."""
    if P ** 8 >= 2 ** 63:
        raise OverflowError(f"modulus {P} too large for 64-bit keys")
    flat = A.reshape(A.shape[:-3] + (8,))
    key = np.zeros(flat.shape[:-1], dtype=np.int64)
    for i in range(7, -1, -1):
        key = key * P + flat[..., i]
    return key


def decode(keys: np.ndarray, P: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64).copy()
    flat = np.empty(keys.shape + (8,), dtype=np.int64)
    for i in range(8):
        flat[..., i] = keys % P
        keys //= P
    return flat.reshape(keys.shape + (2, 2, 2))


def lie_residues(params: FieldParams) -> np.ndarray:
    """Residue Lie algebra: [[u + v s, y s], [z s, -u + v s]] with s = sqrt(eps)."""
    p = params.p
    g = np.array(np.meshgrid(*[np.arange(p)] * 4, indexing="ij")).reshape(4, -1).T
    u, v, y, z = g.T
    X = np.zeros((len(g), 2, 2, 2), dtype=np.int64)
    X[:, 0, 0] = np.stack((u, v), -1)
    X[:, 1, 1] = np.stack((-u % p, v), -1)
    X[:, 0, 1, 1] = y
    X[:, 1, 0, 1] = z
    return X


def canonical_lift(A: np.ndarray, n: int, params: FieldParams) -> np.ndarray:
    """Lift unitary-mod-p^n matrices to unitary-mod-p^(n+1) ones.

    With S = (conj(A)^T w A - w) / p^n, the product A (I - p^n w S / 2) is
    unitary one level up.
    """
    p, eps = params.p, params.epsilon
    P1 = p ** (n + 1)
    A = A % P1
    H = hermitian_defect(A, eps, P1)
    if np.any(H % p ** n):
        raise ValueError(f"matrix is not unitary mod p^{n}")
    S = (H // p ** n) % p
    half = pow(2, -1, p)
    Z = (-half * S[..., ::-1, :, :]) % p
    corr = identity_array(1)[0] + p ** n * Z
    return mat_mul(A, corr, eps, P1)


def lift_array(A: np.ndarray, level: int, target: int, params: FieldParams) -> np.ndarray:
    for n in range(level, target):
        A = canonical_lift(A, n, params)
    return A


# ---------------------------------------------------------------------------
# group elements

@dataclass(frozen=True)
class GroupElement:
    """A matrix in U(1,1)(O_F) known modulo p^level."""

    entries: tuple
    params: FieldParams
    level: int

    @classmethod
    def from_array(cls, A: np.ndarray, params: FieldParams, level: int, check: bool = True) -> "GroupElement":
        P = params.p ** level
        A = np.asarray(A, dtype=np.int64).reshape(2, 2, 2) % P
        if check and not is_unitary_array(A, params.epsilon, P):
            raise ValueError("matrix is not unitary at this precision")
        return cls(tuple(int(x) for x in A.ravel()), params, level)

    @classmethod
    def from_scalars(cls, rows: Sequence[Sequence[TruncatedScalar | int]], params: FieldParams, level: int | None = None):
        level = params.N if level is None else level
        A = np.zeros((2, 2, 2), dtype=np.int64)
        for i in range(2):
            for j in range(2):
                x = rows[i][j]
                A[i, j] = (x, 0) if isinstance(x, int) else (x.a0, x.a1)
        return cls.from_array(A, params, level)

    @classmethod
    def identity(cls, params: FieldParams, level: int | None = None):
        return cls.from_array(identity_array(1)[0], params, params.N if level is None else level)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(2, 2, 2)

    @property
    def modulus(self) -> int:
        return self.params.p ** self.level

    def entry(self, i: int, j: int) -> TruncatedScalar:
        a = self.array[i, j]
        return TruncatedScalar(int(a[0]), int(a[1]), self.params, self.level)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        lv = min(self.level, other.level)
        P = self.params.p ** lv
        return GroupElement.from_array(mat_mul(self.array % P, other.array % P, self.params.epsilon, P), self.params, lv, check=False)

    def inverse(self) -> "GroupElement":
        return GroupElement.from_array(mat_inv_unitary(self.array, self.modulus), self.params, self.level, check=False)

    def reduce(self, level: int) -> "GroupElement":
        if level > self.level:
            raise ValueError("cannot raise precision by reduction")
        return GroupElement.from_array(self.array, self.params, level, check=False)

    def lift(self, level: int) -> "GroupElement":
        A = lift_array(self.array[None], self.level, level, self.params)[0]
        return GroupElement.from_array(A, self.params, level, check=False)

    def is_unitary(self) -> bool:
        return bool(is_unitary_array(self.array, self.params.epsilon, self.modulus))

    def key(self) -> int:
        return int(encode(self.array, self.modulus))

    def __repr__(self):
        a = self.array
        f = lambda e: f"{e[0]}+{e[1]}s" if e[1] else f"{e[0]}"
        return f"[[{f(a[0,0])}, {f(a[0,1])}], [{f(a[1,0])}, {f(a[1,1])}]] mod {self.params.p}^{self.level}"


def lift(g: GroupElement, level: int) -> GroupElement:
    return g.lift(level)


# ---------------------------------------------------------------------------
# monomial matrices: diag(pi^e1, pi^e2), optionally times w

@dataclass(frozen=True)
class Monomial:
    e1: int
    e2: int
    swap: bool = False

    @classmethod
    def eta(cls, d: int = 1) -> "Monomial":
        return cls(0, d)

    @classmethod
    def alpha(cls, t: int = 1) -> "Monomial":
        return cls(-t, t)

    @classmethod
    def w(cls) -> "Monomial":
        return cls(0, 0, True)

    @classmethod
    def alpha_w(cls, t: int = 1) -> "Monomial":
        return cls(-t, t, True)

    def inverse(self) -> "Monomial":
        # (D w)^-1 = w D^-1 = D'^-1 w with the exponents swapped
        if self.swap:
            return Monomial(-self.e2, -self.e1, True)
        return Monomial(-self.e1, -self.e2, False)

    def shifts(self) -> np.ndarray:
        """s[i, j] with (m g m^-1)[i, j] = g[sigma i, sigma j] * pi^s[i, j]."""
        e = (self.e1, self.e2)
        return np.array([[e[i] - e[j] for j in range(2)] for i in range(2)])

    def __str__(self):
        base = f"diag(p^{self.e1}, p^{self.e2})"
        return base + (" w" if self.swap else "")


def conj_monomial_array(A: np.ndarray, m: Monomial, p: int, level: int) -> tuple[np.ndarray, int, np.ndarray]:
    """m A m^-1 for a batch; returns (result, result level, integrality mask)."""
    s = m.shifts()
    if m.swap:
        A = A[..., ::-1, ::-1, :]
    lost = max(0, int(-s.min()))
    out_level = level - lost
    if out_level < 1:
        raise ValueError("monomial conjugation leaves no precision")
    Pout = p ** out_level
    out = np.empty_like(A)
    ok = np.ones(A.shape[:-3], dtype=bool)
    for i in range(2):
        for j in range(2):
            e = int(s[i, j])
            x = A[..., i, j, :]
            if e >= 0:
                out[..., i, j, :] = (x * p ** e) % Pout
            else:
                ok &= e_val_ge(x, -e, p, level)
                out[..., i, j, :] = (x // p ** (-e)) % Pout
    return out, out_level, ok


def conj_by_monomial(g: GroupElement, m: Monomial) -> GroupElement:
    """m g m^-1, which is g conjugated into the subgroup H^m = m H m^-1."""
    out, lv, ok = conj_monomial_array(g.array, m, g.params.p, g.level)
    if not bool(ok):
        raise NotInSubgroup(f"conjugate of {g} by {m} is not integral")
    return GroupElement.from_array(out, g.params, lv, check=False)


# ---------------------------------------------------------------------------
# subgroup descriptions

def _ceil(x: Fraction) -> int:
    return math.ceil(Fraction(x))


def _floor(x: Fraction) -> int:
    return math.floor(Fraction(x))


class SubgroupSpec:
    """Base for membership-tested subgroups of K."""

    name: str = "H"

    def contains(self, A: np.ndarray, level: int, params: FieldParams) -> np.ndarray:
        raise NotImplementedError

    def depth_level(self) -> int:
        """A level m with K_m inside the subgroup, or INF when there is none."""
        raise NotImplementedError

    def cache_key(self) -> str:
        return repr(self)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Pattern(SubgroupSpec):
    """Matrices with v(a-1) >= v11, v(b) >= v12, v(c) >= v21, v(d-1) >= v22.

    Non-positive bounds impose nothing.  INF forces an entry to vanish.
    """

    v11: int
    v12: int
    v21: int
    v22: int
    name: str = "pattern"

    @property
    def bounds(self) -> tuple[int, int, int, int]:
        return (self.v11, self.v12, self.v21, self.v22)

    def contains(self, A, level, params):
        p = params.p
        P = p ** level
        one = np.array([1, 0])
        ok = e_val_ge((A[..., 0, 0, :] - one) % P, self.v11, p, level)
        ok &= e_val_ge(A[..., 0, 1, :], self.v12, p, level)
        ok &= e_val_ge(A[..., 1, 0, :], self.v21, p, level)
        ok &= e_val_ge((A[..., 1, 1, :] - one) % P, self.v22, p, level)
        return ok

    def depth_level(self):
        return max(0, *self.bounds)

    def conjugate(self, m: Monomial, name: str | None = None) -> "Pattern":
        """Pattern of K meet m H m^-1.

        k lies in m H m^-1 iff m^-1 k m lies in H; entry (i, j) of m^-1 k m
        is k[s(i), s(j)] times pi^shift[i, j].
        """
        b = [[self.v11, self.v12], [self.v21, self.v22]]
        mi = m.inverse()
        sig = [1, 0] if mi.swap else [0, 1]
        s = mi.shifts()
        nb = [[0, 0], [0, 0]]
        for i in range(2):
            for j in range(2):
                src = b[i][j]
                if i != j and src < INF:
                    src = max(0, src - int(s[i, j]))
                nb[sig[i]][sig[j]] = src
        return Pattern(nb[0][0], nb[0][1], nb[1][0], nb[1][1], name or f"{self.name}^{m}")

    def intersect(self, other: "Pattern", name: str | None = None) -> "Pattern":
        return Pattern(*(max(a, b) for a, b in zip(self.bounds, other.bounds)), name=name or f"{self.name}&{other.name}")


def K_spec() -> Pattern:
    return Pattern(0, 0, 0, 0, "K")


def principal_congruence(r: int) -> Pattern:
    return Pattern(r, r, r, r, f"K_{r}")


def B_spec() -> Pattern:
    return Pattern(0, 0, INF, 0, "B")


def Bop_spec() -> Pattern:
    return Pattern(0, INF, 0, 0, "Bop")


def BK_spec(d: int) -> Pattern:
    return Pattern(0, 0, d, 0, f"BK_{d}")


def BopK_spec(d: int) -> Pattern:
    return Pattern(0, d, 0, 0, f"BopK_{d}")


def moy_prasad_spec(y: Fraction, r: Fraction, plus: bool = False) -> Pattern:
    """Entry-valuation pattern of G_{y,r} (or G_{y,r+}) for y in [0, 1]."""
    y, r = Fraction(y), Fraction(r)
    if not (0 <= y <= 1) or r < 0:
        raise ValueError("need 0 <= y <= 1 and r >= 0")
    f = (lambda x: _floor(x) + 1) if plus else _ceil
    name = f"G_{{{y},{r}{'+' if plus else ''}}}"
    return Pattern(f(r), f(r - y), f(r + y), f(r), name)


@dataclass(frozen=True)
class Torus(SubgroupSpec):
    """{[[a, b], [c b, a]]} inside K, with v(a-1) >= amin and v(b) >= bmin.

    c is a p-integral rational; c = 0 with bmin = INF gives the centre.
    """

    c: Fraction
    amin: int = 0
    bmin: int = 0
    name: str = "T"

    def contains(self, A, level, params):
        p, P = params.p, params.p ** level
        cr = frac_to_residue(self.c, p, level)
        a, b = A[..., 0, 0, :], A[..., 0, 1, :]
        ok = np.all(A[..., 1, 1, :] == a, axis=-1)
        ok &= np.all(A[..., 1, 0, :] == (cr * b) % P, axis=-1)
        ok &= e_val_ge((a - np.array([1, 0])) % P, self.amin, p, level)
        ok &= e_val_ge(b, self.bmin, p, level)
        return ok

    def depth_level(self):
        return INF

    def with_bounds(self, amin: int, bmin: int, name: str | None = None) -> "Torus":
        return Torus(self.c, amin, bmin, name or f"{self.name}[{amin},{bmin}]")


def center_spec(amin: int = 0) -> Torus:
    return Torus(Fraction(0), amin, INF, "Z" if amin == 0 else f"Z_{amin}")


@dataclass(frozen=True)
class Product(SubgroupSpec):
    """A torus-type group times a pattern group containing some K_m."""

    torus: Torus
    pattern: Pattern
    name: str = "TH"

    def depth_level(self):
        return self.pattern.depth_level()

    def contains(self, A, level, params):
        return factor_product(self, A, level, params)[0]


@dataclass(frozen=True)
class Explicit(SubgroupSpec):
    """A subgroup given by an explicit list of keys at a fixed level."""

    level: int
    keys: tuple
    name: str = "explicit"

    def contains(self, A, level, params):
        if level < self.level:
            raise ValueError("explicit subgroup needs more precision")
        P = params.p ** self.level
        k = encode(A % P, P)
        tbl = np.array(self.keys, dtype=np.int64)
        idx = np.clip(np.searchsorted(tbl, k), 0, len(tbl) - 1)
        return tbl[idx] == k

    def depth_level(self):
        return self.level

    def cache_key(self):
        h = hashlib.sha1(np.array(self.keys, dtype=np.int64).tobytes()).hexdigest()
        return f"Explicit({self.level},{h},{self.name})"


# ---------------------------------------------------------------------------
# enumeration

_memo: dict = {}
_cache_dir: str | None = os.environ.get("BRANCHLAB_CACHE") or None


def set_cache_dir(path: str | None) -> None:
    global _cache_dir
    _cache_dir = path
    if path:
        os.makedirs(path, exist_ok=True)


def set_cap(cap: int | None) -> None:
    """Element budget used when quotient_enumerate gets no explicit cap."""
    global _cap
    _cap = DEFAULT_CAP if cap is None else cap


def clear_memo() -> None:
    _memo.clear()


def _residue_K(params: FieldParams) -> np.ndarray:
    """All unitary matrices over the residue ring, by brute force on pairs of rows."""
    p, eps = params.p, params.epsilon
    vals = np.array(np.meshgrid(*[np.arange(p)] * 4, indexing="ij")).reshape(4, -1).T
    rows = vals.reshape(-1, 2, 2)  # a row is two entries, each an (a0, a1) pair
    out = []
    for r1 in rows:
        cand = np.empty((len(rows), 2, 2, 2), dtype=np.int64)
        cand[:, 0] = r1
        cand[:, 1] = rows
        out.append(cand[is_unitary_array(cand, eps, p)])
    return np.concatenate(out)


def _disk_path(params: FieldParams, spec: SubgroupSpec, level: int) -> str | None:
    if not _cache_dir:
        return None
    h = hashlib.sha256(f"{params.p},{params.epsilon},{level},{spec.cache_key()}".encode()).hexdigest()[:24]
    return os.path.join(_cache_dir, f"enum_{params.p}_{level}_{h}.npy")


def quotient_enumerate(spec: SubgroupSpec, level: int, params: FieldParams, cap: int | None = None) -> np.ndarray:
    """All elements of spec mod K_level, sorted by key."""
    cap = _cap if cap is None else cap
    mkey = (params.p, params.epsilon, level, spec.cache_key())
    hit = _memo.get(mkey)
    path = _disk_path(params, spec, level)
    if hit is None and path and os.path.exists(path):
        hit = _memo[mkey] = np.load(path).astype(np.int64)
    if hit is not None:
        if len(hit) > cap:
            raise CapExceeded(f"{spec} at level {level} has {len(hit)} elements (cap {cap})")
        return hit
    p, q4 = params.p, params.p ** 4
    cur = _residue_K(params) if level >= 1 else identity_array(1)
    cur = cur[spec.contains(cur, 1, params)]
    fiber = lie_residues(params)
    for n in range(1, level):
        if len(cur) * q4 > cap:
            raise CapExceeded(f"{spec} at level {n + 1} needs up to {len(cur) * q4} elements (cap {cap})")
        P1 = p ** (n + 1)
        base = canonical_lift(cur, n, params)
        pieces = []
        corr = identity_array(1) + p ** n * fiber
        for chunk in range(0, len(base), 4096):
            b = base[chunk:chunk + 4096]
            cand = mat_mul(b[:, None], corr[None], params.epsilon, P1).reshape(-1, 2, 2, 2)
            pieces.append(cand[spec.contains(cand, n + 1, params)])
        cur = np.concatenate(pieces) if pieces else np.zeros((0, 2, 2, 2), dtype=np.int64)
    if len(cur) > cap:
        raise CapExceeded(f"{spec} at level {level} has {len(cur)} elements (cap {cap})")
    P = p ** level
    cur = cur[np.argsort(encode(cur, P), kind="stable")]
    _memo[mkey] = cur
    if path:
        np.save(path, cur.astype(np.uint16))
    return cur


def stream(spec: SubgroupSpec, level: int, params: FieldParams, cap: int | None = None) -> Iterator[GroupElement]:
    for A in quotient_enumerate(spec, level, params, cap):
        yield GroupElement.from_array(A, params, level, check=False)


def quotient_order(params: FieldParams, level: int) -> int:
    """|K/K_level| by the lifting count q^4 per level."""
    q = params.q
    return q * (q - 1) * (q + 1) ** 2 * q ** (4 * (level - 1))


def kernel_fiber_size(params: FieldParams, n: int) -> int:
    """Number of unitary matrices I + p^n X mod p^(n+1), X over all residue matrices."""
    p = params.p
    vals = np.array(np.meshgrid(*[np.arange(p)] * 8, indexing="ij")).reshape(8, -1).T
    X = vals.reshape(-1, 2, 2, 2)
    P1 = p ** (n + 1)
    return int(is_unitary_array((identity_array(1) + p ** n * X) % P1, params.epsilon, P1).sum())


def fiber_candidates(g: np.ndarray, n: int, params: FieldParams) -> int:
    """Unitary lifts of g among all p^8 candidates g~ + p^n X."""
    p = params.p
    vals = np.array(np.meshgrid(*[np.arange(p)] * 8, indexing="ij")).reshape(8, -1).T
    X = vals.reshape(-1, 2, 2, 2)
    P1 = p ** (n + 1)
    return int(is_unitary_array((g[None] + p ** n * X) % P1, params.epsilon, P1).sum())


# ---------------------------------------------------------------------------
# lookup tables of sorted keys

class KeyTable:
    """Sorted keys with a payload index, for vectorized membership."""

    def __init__(self, keys: np.ndarray, payload: np.ndarray | None = None):
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.payload = (np.arange(len(keys)) if payload is None else payload)[order]

    def find(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if len(self.keys) == 0:
            return np.zeros(keys.shape, bool), np.zeros(keys.shape, np.int64)
        idx = np.clip(np.searchsorted(self.keys, keys), 0, len(self.keys) - 1)
        hit = self.keys[idx] == keys
        return hit, self.payload[idx]


_ptables: dict = {}


def _product_table(spec: Product, m: int, params: FieldParams):
    key = (params.p, params.epsilon, m, spec.cache_key())
    if key in _ptables:
        return _ptables[key]
    P = params.p ** m
    T = quotient_enumerate(spec.torus, m, params)
    H = quotient_enumerate(spec.pattern, m, params)
    Hkeys = KeyTable(encode(H, P))
    # one torus element per coset of T meet H
    inT = Hkeys.find(encode(T, P))[0]
    T_in_H = T[inT]
    seen = np.zeros(0, dtype=np.int64)
    reps = []
    for i in range(len(T)):
        k = encode(T[i], P)
        if np.isin(k, seen):
            continue
        reps.append(i)
        seen = np.concatenate([seen, encode(mat_mul(T[i][None], T_in_H, params.epsilon, P), P)])
    keys, who = [], []
    for i in reps:
        prod = mat_mul(T[i][None], H, params.epsilon, P)
        keys.append(encode(prod, P))
        who.append(np.full(len(H), i))
    tbl = KeyTable(np.concatenate(keys), np.concatenate(who))
    _ptables[key] = (tbl, T)
    return _ptables[key]


def factor_product(spec: Product, A: np.ndarray, level: int, params: FieldParams):
    """Membership in T*H and, for members, a torus factor at ``level``.

    Returns (mask, tau) with tau in the torus and tau^-1 A in the pattern group
    for every member.
    """
    m = min(level, max(1, spec.depth_level()))
    tbl, Tm = _product_table(spec, m, params)
    Pm = params.p ** m
    hit, who = tbl.find(encode(A % Pm, Pm))
    tau_m = Tm[who]
    if level == m:
        tau = tau_m
    else:
        Tn = quotient_enumerate(spec.torus, level, params)
        red = KeyTable(encode(Tn % Pm, Pm))
        ok, idx = red.find(encode(tau_m, Pm))
        assert np.all(ok[hit]), "torus table is not closed under reduction"
        tau = Tn[idx]
    return hit, tau


# ---------------------------------------------------------------------------
# cosets, transversals, double cosets

def coset_labels(H: SubgroupSpec, ambient: SubgroupSpec, level: int, params: FieldParams, side: str = "right"):
    """Partition ambient mod K_level into cosets of H.

    side="right" labels H x, side="left" labels x H.  Returns
    (elements, labels, representatives) with representatives at ``level``.
    """
    P = params.p ** level
    G = quotient_enumerate(ambient, level, params)
    Hel = quotient_enumerate(H, level, params)
    table = KeyTable(encode(G, P))
    labels = np.full(len(G), -1, dtype=np.int64)
    reps = []
    for i in range(len(G)):
        if labels[i] >= 0:
            continue
        x = G[i]
        coset = mat_mul(Hel, x[None], params.epsilon, P) if side == "right" else mat_mul(x[None], Hel, params.epsilon, P)
        ok, idx = table.find(encode(coset, P))
        if not np.all(ok):
            raise ValueError(f"{H} is not contained in {ambient}")
        labels[idx] = len(reps)
        reps.append(x)
    return G, labels, np.array(reps)


def transversal(H: SubgroupSpec, params: FieldParams, ambient: SubgroupSpec | None = None, level: int | None = None) -> np.ndarray:
    """Representatives x of the right cosets H x of H in ambient (default K).

    Computed where H contains K_m, then lifted to the working precision.
    """
    ambient = ambient or K_spec()
    m = level if level is not None else H.depth_level()
    if m >= INF:
        raise ValueError(f"{H} contains no congruence subgroup")
    m = max(1, m)
    _, _, reps = coset_labels(H, ambient, m, params)
    return lift_array(reps, m, params.N, params)


def double_coset_verify(H1: SubgroupSpec, H2: SubgroupSpec, reps: Sequence[GroupElement], params: FieldParams, level: int,
                        ambient: SubgroupSpec | None = None) -> dict:
    """Check that reps give disjoint double cosets H1 g H2 covering the ambient group.

    Both the mass formula with intersection sizes and the orbit-disjointness
    test are computed on the quotient at ``level``.
    """
    ambient = ambient or K_spec()
    P, eps = params.p ** level, params.epsilon
    G = quotient_enumerate(ambient, level, params)
    H1el = quotient_enumerate(H1, level, params)
    H2el = quotient_enumerate(H2, level, params)
    # left cosets x H2 labelled over the ambient group
    _, lab, _ = coset_labels(H2, ambient, level, params, side="left")
    gtab = KeyTable(encode(G, P), lab)
    orbits, inter, mass = [], [], Fraction(0)
    for g in reps:
        ga = g.reduce(level).array
        _, o = gtab.find(encode(mat_mul(H1el, ga[None], eps, P), P))
        orbits.append(set(np.unique(o).tolist()))
        conj = mat_mul(mat_mul(mat_inv_unitary(ga, P)[None], H1el, eps, P), ga[None], eps, P)
        n_int = int(H2.contains(conj, level, params).sum())
        inter.append(n_int)
        mass += Fraction(len(H1el) * len(H2el), n_int)
    disjoint = all(not (orbits[i] & orbits[j]) for i in range(len(reps)) for j in range(i))
    covered = sum(len(o) for o in orbits) == len(set(lab.tolist()))
    return {
        "mass": mass,
        "order": len(G),
        "mass_ok": mass == len(G),
        "disjoint": disjoint,
        "covered": covered,
        "orbit_sizes": [len(o) for o in orbits],
        "intersections": inter,
        "ok": mass == len(G) and disjoint and covered,
    }


# ---------------------------------------------------------------------------
# factorizations

def factor_B_Kd(a: GroupElement, d: int) -> tuple[GroupElement, GroupElement]:
    """a = b k with b upper triangular in K and k in K_d, for a in B K_d.

    b = [[conj(a22)^-1, a12], [0, a22]] and k = [[1, 0], [a21/a22, 1]].
    """
    par, P = a.params, a.modulus
    if not bool(BK_spec(d).contains(a.array, a.level, par)):
        raise NotInSubgroup(f"{a} is not in BK_{d}")
    A = a.array
    a22 = A[1, 1]
    inv22 = e_inv(a22, par.epsilon, P)
    b = np.zeros((2, 2, 2), dtype=np.int64)
    b[0, 0] = e_conj(inv22, P)
    b[0, 1] = A[0, 1]
    b[1, 1] = a22
    k = identity_array(1)[0]
    k[1, 0] = e_mul(A[1, 0], inv22, par.epsilon, P)
    bg = GroupElement.from_array(b, par, a.level)
    kg = GroupElement.from_array(k, par, a.level)
    assert (bg * kg).entries == a.entries
    return bg, kg


@dataclass(frozen=True)
class BopTDecomposition:
    lower: GroupElement
    torus: GroupElement
    uses_w: bool


def decompose_Bop_T(k: GroupElement, c: Fraction) -> BopTDecomposition:
    """Write k = L tau or k = L w tau with L lower triangular and tau in T_{1,c}.

    tau = [[a, b], [c b, a]] is chosen so that the (1,2) entry of k tau^-1
    (or the (1,1) entry, in the w case) vanishes, then normalised to norm one.
    """
    from .scalars import conj as sconj, norm, solve_norm

    def root(t: TruncatedScalar) -> TruncatedScalar:
        # prefer the root that is 1 mod p, so k = I gives tau = I
        return solve_norm(t, level=1) if t.a0 % p == 1 and t.a1 == 0 else solve_norm(t)

    par, p = k.params, k.params.p
    x, y = k.entry(0, 0), k.entry(0, 1)
    vc = INF if c == 0 else vp_frac(c, p)
    lv = k.level
    uses_w = False
    if x.is_unit():
        r = y * x.inverse()
        s = TruncatedScalar(1, 0, par, lv) + frac_to_residue(c, p, lv) * norm(r)
        a = root(s.inverse())
        b = -(sconj(r) * a)
    else:
        r = x * y.inverse()
        s = TruncatedScalar(norm(r), 0, par, lv) + frac_to_residue(c, p, lv)
        if s.is_unit():
            b = root(s.inverse())
            a = -(sconj(r) * b)
        else:
            if vc != 1:
                raise ValueError("no B^op T or B^op w T form")
            uses_w = True
            # b = -conj(x) a / (conj(y) c), dividing by pi first
            lv -= 1
            par_lv = par
            xs = TruncatedScalar(x.a0 // p, x.a1 // p, par_lv, lv)
            cu = Fraction(c) / p
            yy = y.reduce(lv)
            t = xs * yy.inverse() * frac_to_residue(1 / cu, p, lv)
            s = TruncatedScalar(1, 0, par, lv) + frac_to_residue(c, p, lv) * norm(t)
            a = root(s.inverse()).reduce(lv)
            b = -(sconj(t) * a)
    a, b = a.reduce(lv), b.reduce(lv)
    cb = b * frac_to_residue(c, p, lv)
    tau = GroupElement.from_scalars([[a, b], [cb, a]], par, lv)
    kk = k.reduce(lv)
    L = kk * tau.inverse()
    if uses_w:
        W = GroupElement.from_array(np.array([[[0, 0], [1, 0]], [[1, 0], [0, 0]]]), par, lv)
        L = L * W
        assert (L * W * tau).entries == kk.entries
    else:
        assert (L * tau).entries == kk.entries
    if L.array[0, 1].any():
        raise AssertionError("lower factor is not lower triangular")
    return BopTDecomposition(L, tau, uses_w)


# ---------------------------------------------------------------------------
# Lie algebra

@dataclass(frozen=True)
class LieElement:
    """pi^(-shift) X0 with X0 integral, known modulo p^prec in the X0 entries."""

    X0: tuple
    params: FieldParams
    prec: int
    shift: int = 0

    @classmethod
    def from_array(cls, X: np.ndarray, params: FieldParams, prec: int, shift: int = 0):
        X = np.asarray(X, dtype=np.int64).reshape(2, 2, 2) % params.p ** prec
        return cls(tuple(int(v) for v in X.ravel()), params, prec, shift)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.X0, dtype=np.int64).reshape(2, 2, 2)

    def is_in_lie(self) -> bool:
        """conj(X)^T w + w X = 0 at the represented precision."""
        P = self.params.p ** self.prec
        X = self.array
        Xb = e_conj(X, P)
        M = np.swapaxes(Xb, 0, 1)[:, ::-1] + X[::-1]
        return not np.any(M % P)

    def reduce_mod(self, pat: Pattern) -> np.ndarray:
        """Entries of X0 reduced modulo the lattice with the given valuation bounds."""
        p = self.params.p
        X = self.array.copy()
        b = [[pat.v11, pat.v12], [pat.v21, pat.v22]]
        for i in range(2):
            for j in range(2):
                X[i, j] %= p ** max(0, min(b[i][j] + self.shift, self.prec))
        return X


def mp_isomorphism(g: GroupElement, y: Fraction, r: Fraction, s: Fraction) -> LieElement:
    """G_{y,r}/G_{y,s} -> g_{y,r}/g_{y,s}, g -> g - 1, valid for r < s <= 2r."""
    r, s = Fraction(r), Fraction(s)
    if not (r < s <= 2 * r):
        raise ValueError("need r < s <= 2r")
    if not bool(moy_prasad_spec(y, r).contains(g.array, g.level, g.params)):
        raise NotInSubgroup(f"{g} not in G_{{{y},{r}}}")
    X = g.array - identity_array(1)[0]
    return LieElement.from_array(X, g.params, g.level)


# ---------------------------------------------------------------------------
# tori

@dataclass(frozen=True)
class AnisotropicTorus:
    """T_{g1,g2} = {[[a, b g1], [b g2, a]]} with a conj(a) + b conj(b) g1 g2 = 1.

    Elements are handled through the model torus T_{1, g1 g2} inside K, whose
    (a, b) coordinates use the same b.  ``y`` is the building point the
    torus belongs to.
    """

    gamma1: Fraction
    gamma2: Fraction
    y: Fraction
    label: str

    @property
    def c(self) -> Fraction:
        return self.gamma1 * self.gamma2

    @property
    def ramified(self) -> bool:
        return self.y == Fraction(1, 2)

    def model(self) -> Torus:
        return Torus(self.c, 0, 0, f"model {self.label}")

    def v_gamma1(self, p: int) -> int:
        return vp_frac(self.gamma1, p)

    def filtration(self, r: Fraction, p: int, plus: bool = False) -> Torus:
        """T_r (or T_{r+}) in model coordinates: a in 1 + p^A, b in p^B."""
        r = Fraction(r)
        f = (lambda x: _floor(x) + 1) if plus else _ceil
        A = f(r)
        B = f(r - self.y) - self.v_gamma1(p)
        return Torus(self.c, max(A, 0), max(B, 0), f"{self.label}_{r}{'+' if plus else ''}")

    def intersect_K(self, m: Monomial, p: int) -> tuple[Torus, Fraction]:
        """K meet m T m^-1 as a model torus T_{1,c'} plus the map b' -> b.

        Returns (spec, lam) where the element [[a, b'], [c' b', a]] comes from
        the torus element with coordinate b = lam * b'.
        """
        pi = Fraction(p)
        t = (m.e2 - m.e1) // 2
        if m.e1 != -t or m.e2 != t:
            raise ValueError("only alpha^t and alpha^t w are supported")
        g1, g2 = self.gamma1, self.gamma2
        if m.swap:
            c2 = g1 / g2 * pi ** (4 * t)
            lam = pi ** (2 * t) / g2
        else:
            c2 = g2 / g1 * pi ** (4 * t)
            lam = pi ** (2 * t) / g1
        if vp_frac(c2, p) < 0:
            raise ValueError("torus conjugate has non-integral coordinates")
        return Torus(c2, 0, 0, f"K&{self.label}^{m}"), lam


def standard_tori(p: int, epsilon: int) -> dict[str, AnisotropicTorus]:
    """The four classes of anisotropic tori up to conjugacy."""
    pi = Fraction(p)
    return {
        "T11": AnisotropicTorus(Fraction(1), Fraction(1), Fraction(0), "T11"),
        "Tww": AnisotropicTorus(1 / pi, pi, Fraction(1), "Tww"),
        "T1w": AnisotropicTorus(Fraction(1), pi, Fraction(1, 2), "T1w"),
        "T1ew": AnisotropicTorus(Fraction(1), pi / epsilon, Fraction(1, 2), "T1ew"),
    }


def decompose_Bop_T_array(A: np.ndarray, c: Fraction, level: int, params: FieldParams):
    """Vectorized form of :func:`decompose_Bop_T` for a batch of elements.

    Returns (L, tau, uses_w, out_level); every row satisfies
    A = L tau or A = L w tau modulo p^out_level.
    """
    from .scalars import solve_norm_array

    p, eps = params.p, params.epsilon
    vc = INF if c == 0 else vp_frac(c, p)
    lv = level - 1 if vc == 1 else level
    P = p ** lv
    full = A % p ** level
    A = full % P
    cr = frac_to_residue(c, p, lv)
    x, y = A[:, 0, 0], A[:, 0, 1]
    xunit = e_norm(x, eps, p) % p != 0
    a = np.zeros_like(x)
    b = np.zeros_like(x)
    uses_w = np.zeros(len(A), dtype=bool)
    inv = lambda z: e_inv(z, eps, P)

    # x a unit: b = -conj(y/x) a
    i = np.nonzero(xunit)[0]
    if len(i):
        r = e_mul(y[i], inv(x[i]), eps, P)
        s = (1 + cr * e_norm(r, eps, P)) % P
        ai = solve_norm_array(inverse_table_of(s, P), params, lv)
        a[i] = ai
        b[i] = (-e_mul(e_conj(r, P), ai, eps, P)) % P
    # x not a unit, so y is: a = -conj(x/y) b
    j = np.nonzero(~xunit)[0]
    if len(j):
        r = e_mul(x[j], inv(y[j]), eps, P)
        s = (e_norm(r, eps, P) + cr) % P
        good = s % p != 0
        jj = j[good]
        if len(jj):
            bj = solve_norm_array(inverse_table_of(s[good], P), params, lv)
            b[jj] = bj
            a[jj] = (-e_mul(e_conj(r[good], P), bj, eps, P)) % P
        jw = j[~good]
        if len(jw):
            if vc != 1:
                raise ValueError("no B^op T or B^op w T form")
            uses_w[jw] = True
            xs = (full[jw, 0, 0] // p) % P  # x / pi, known to precision lv
            cu = frac_to_residue(Fraction(c) / p, p, lv)
            t = e_mul(xs, inv(y[jw]), eps, P) * pow(cu, -1, P) % P
            s = (1 + cr * e_norm(t, eps, P)) % P
            aw = solve_norm_array(inverse_table_of(s, P), params, lv)
            a[jw] = aw
            b[jw] = (-e_mul(e_conj(t, P), aw, eps, P)) % P
    tau = np.zeros_like(A)
    tau[:, 0, 0] = a
    tau[:, 1, 1] = a
    tau[:, 0, 1] = b
    tau[:, 1, 0] = (cr * b) % P
    L = mat_mul(A, mat_inv_unitary(tau, P), eps, P)
    W = np.zeros((2, 2, 2), dtype=np.int64)
    W[0, 1, 0] = W[1, 0, 0] = 1
    L[uses_w] = mat_mul(L[uses_w], W[None], eps, P)
    return L, tau, uses_w, lv


def inverse_table_of(x: np.ndarray, P: int) -> np.ndarray:
    from .scalars import inverse_table

    return inverse_table(P)[x % P]
