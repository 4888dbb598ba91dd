"""Cuspidal characters of U(1,1)(F_q) and the depth-zero layer over them.

The residue group is K mod K_1.  Its cuspidal characters sigma(alpha, beta)
are indexed by unordered pairs of distinct characters of the norm-one group
e1 of F_{q^2} (cyclic of order q+1), with values

    scalar x            (q-1) alpha(x) beta(x)
    x times unipotent   -alpha(x) beta(x)
    split semisimple    0
    elliptic, eigenvalues x+y, x-y in e1
                        alpha(x+y) beta(x-y) + alpha(x-y) beta(x+y)

Besides the table-driven characters this module carries a brute-force
irreducible-character computation (classes, class-algebra eigenvectors mod a
prime) used as an independent cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .abelian import FiniteAbelianGroup
from .classfn import ClassFunction, CyclotomicValue, Terms, pairing_sum
from .groups import (
    BK_spec,
    K_spec,
    KeyTable,
    Monomial,
    Pattern,
    center_spec,
    conj_monomial_array,
    encode,
    identity_array,
    mat_inv_unitary,
    mat_mul,
    quotient_enumerate,
)
from .scalars import FieldParams, is_prime, make_params


# ---------------------------------------------------------------------------
# the residue quadratic field

class ResidueField:
    """F_{q^2} as pairs (a0, a1) = a0 + a1 sqrt(eps), with the norm-one group."""

    def __init__(self, params: FieldParams):
        self.q = q = params.p
        self.eps = params.epsilon
        self.elements = [(a, b) for a in range(q) for b in range(q)]
        self.e1 = [x for x in self.elements if self.norm(x) == 1]
        self.generator = next(x for x in self.e1 if self.order(x) == q + 1)
        self.log = {}
        y = (1, 0)
        for j in range(q + 1):
            self.log[y] = j
            y = self.mul(y, self.generator)

    def mul(self, x, y):
        q, e = self.q, self.eps
        return ((x[0] * y[0] + e * x[1] * y[1]) % q, (x[0] * y[1] + x[1] * y[0]) % q)

    def add(self, x, y):
        return ((x[0] + y[0]) % self.q, (x[1] + y[1]) % self.q)

    def sub(self, x, y):
        return ((x[0] - y[0]) % self.q, (x[1] - y[1]) % self.q)

    def norm(self, x):
        return (x[0] * x[0] - self.eps * x[1] * x[1]) % self.q

    def order(self, x) -> int:
        y, k = x, 1
        while y != (1, 0):
            y, k = self.mul(y, x), k + 1
        return k

    def inv(self, x):
        n = pow(self.norm(x), -1, self.q)
        return ((x[0] * n) % self.q, (-x[1] * n) % self.q)


@lru_cache(maxsize=None)
def residue_field(params: FieldParams) -> ResidueField:
    return ResidueField(params.at(1))


@dataclass(frozen=True)
class ResidueCharacter:
    """The character of e1 sending the fixed generator to zeta_{q+1}^k."""

    k: int
    q: int

    def __post_init__(self):
        object.__setattr__(self, "k", self.k % (self.q + 1))

    def exponent(self, log: int) -> int:
        return (self.k * log) % (self.q + 1)

    def generator_image(self) -> CyclotomicValue:
        return CyclotomicValue.root(self.k, self.q + 1)

    def __mul__(self, other: "ResidueCharacter") -> "ResidueCharacter":
        return ResidueCharacter(self.k + other.k, self.q)

    def __pow__(self, n: int) -> "ResidueCharacter":
        return ResidueCharacter(self.k * n, self.q)

    @property
    def order(self) -> int:
        return (self.q + 1) // math.gcd(self.k, self.q + 1)


# ---------------------------------------------------------------------------
# classification of residue elements

def classify_residue_element(g: np.ndarray, params: FieldParams) -> tuple[str, tuple]:
    """Table tag for a unitary matrix over F_q (array (2, 2, 2) of residues).

    Returns ("central", (x,)), ("unipotent", (x,)), ("split", (x, y)) or
    ("anisotropic", (l1, l2)), with eigenvalues as F_{q^2} pairs.
    """
    F = residue_field(params)
    g = np.asarray(g) % F.q
    a, b, c, d = (tuple(int(v) for v in g[i, j]) for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    tr = F.add(a, d)
    det = F.sub(F.mul(a, d), F.mul(b, c))
    roots = [t for t in F.elements if F.add(F.sub(F.mul(t, t), F.mul(tr, t)), det) == (0, 0)]
    if not roots:
        raise ValueError("characteristic polynomial has no root in F_{q^2}")
    if len(roots) == 1:
        x = roots[0]
        if F.norm(x) != 1:
            raise ValueError("repeated eigenvalue off the norm-one group")
        if b == (0, 0) and c == (0, 0) and a == d:
            return "central", (x,)
        return "unipotent", (x,)
    l1, l2 = roots
    if F.norm(l1) == 1 and F.norm(l2) == 1:
        return "anisotropic", (l1, l2)
    return "split", (l1, l2)


@lru_cache(maxsize=None)
def residue_group(params: FieldParams) -> np.ndarray:
    return quotient_enumerate(K_spec(), 1, params.at(1))


@lru_cache(maxsize=None)
def residue_classes(params: FieldParams) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force conjugacy classes: (class id per element, representative index per class)."""
    G = residue_group(params)
    q, eps = params.p, params.epsilon
    tbl = KeyTable(encode(G, q))
    cls = np.full(len(G), -1, dtype=np.int64)
    reps = []
    Gi = mat_inv_unitary(G, q)
    for i in range(len(G)):
        if cls[i] >= 0:
            continue
        orb = mat_mul(mat_mul(G, G[i][None], eps, q), Gi, eps, q)
        _, idx = tbl.find(encode(orb, q))
        cls[idx] = len(reps)
        reps.append(i)
    return cls, np.array(reps)


def class_tags(params: FieldParams) -> list[tuple[str, tuple]]:
    G = residue_group(params)
    return [classify_residue_element(g, params) for g in G]


# ---------------------------------------------------------------------------
# Table-driven cuspidal characters

def _table_terms(tag: tuple[str, tuple], alpha: ResidueCharacter, beta: ResidueCharacter, F: ResidueField):
    kind, par = tag
    q = F.q
    out = _table_terms_raw(kind, par, alpha, beta, F, q)
    return [(e % (q + 1), c) for e, c in out]


def _table_terms_raw(kind, par, alpha, beta, F, q):
    if kind == "central":
        j = F.log[par[0]]
        return [(alpha.exponent(j) + beta.exponent(j), q - 1)]
    if kind == "unipotent":
        j = F.log[par[0]]
        return [(alpha.exponent(j) + beta.exponent(j), -1)]
    if kind == "split":
        return []
    i, j = F.log[par[0]], F.log[par[1]]
    return [(alpha.exponent(i) + beta.exponent(j), -1), (alpha.exponent(j) + beta.exponent(i), -1)]


@dataclass
class CuspidalDatum:
    alpha: ResidueCharacter
    beta: ResidueCharacter
    character: ClassFunction
    values: list  # per residue element: list of (exponent mod q+1, coefficient)

    @property
    def central_exponent(self) -> int:
        """theta = alpha beta on e1, as a ResidueCharacter exponent."""
        return (self.alpha.k + self.beta.k) % (self.alpha.q + 1)

    @property
    def theta(self) -> ResidueCharacter:
        return self.alpha * self.beta


def _lookup_fn(params: FieldParams, values: list, M: int):
    """Evaluator reading the residue of its argument off a per-element table."""
    q = params.p
    G = residue_group(params)
    tbl = KeyTable(encode(G, q))
    width = max(1, max(len(v) for v in values))
    E = np.zeros((len(G), width), dtype=np.int64)
    C = np.zeros((len(G), width), dtype=np.int64)
    for i, v in enumerate(values):
        for t, (e, c) in enumerate(v):
            E[i, t], C[i, t] = e, c

    def evaluate_residues(R: np.ndarray) -> Terms:
        ok, idx = tbl.find(encode(R % q, q))
        if not np.all(ok):
            raise ValueError("argument is not unitary mod p")
        n = len(R)
        rows = np.repeat(np.arange(n), width)
        ex, co = E[idx].ravel(), C[idx].ravel()
        keep = co != 0
        return Terms(n, rows[keep], ex[keep], co[keep], M)

    return evaluate_residues


def table2_character(alpha: ResidueCharacter, beta: ResidueCharacter, params: FieldParams) -> CuspidalDatum:
    """sigma(alpha, beta) inflated to K."""
    if alpha.k == beta.k:
        raise ValueError("alpha and beta must be distinct")
    F = residue_field(params)
    tags = class_tags(params)
    values = [_table_terms(t, alpha, beta, F) for t in tags]
    ev = _lookup_fn(params, values, params.p + 1)
    chi = ClassFunction(f"sigma({alpha.k},{beta.k})", K_spec(), params, lambda A, lv: ev(A), 1, params.p + 1)
    return CuspidalDatum(alpha, beta, chi, values)


def all_cuspidal(params: FieldParams) -> list[CuspidalDatum]:
    """One datum per unordered pair {alpha, beta}."""
    q = params.p
    return [table2_character(ResidueCharacter(a, q), ResidueCharacter(b, q), params)
            for a in range(q + 1) for b in range(a + 1, q + 1)]


def residue_values(chi: ClassFunction, params: FieldParams) -> list[CyclotomicValue]:
    G = residue_group(params)
    t = chi(G, 1)
    return [t.value(i) for i in range(len(G))]


def eta_twist(sigma: CuspidalDatum, d: int) -> ClassFunction:
    """sigma^(eta^d) on B K_d: a -> sigma(eta^-d a eta^d mod p).

    The conjugate is [[a11, a12 pi^d], [a21 / pi^d, a22]], which reduces to
    [[a11, 0], [a21 / pi^d, conj(a11)^-1]] mod p.
    """
    if d < 1:
        raise ValueError("d must be positive")
    chi = sigma.character
    params = chi.params
    m = Monomial.eta(d).inverse()
    spec = BK_spec(d)

    def fn(A, lv):
        if not np.all(spec.contains(A, lv, params)):
            raise ValueError(f"argument not in BK_{d}")
        B, _, ok = conj_monomial_array(A, m, params.p, lv)
        assert np.all(ok)
        return chi(B % params.p, 1)

    return ClassFunction(f"{chi.name}^eta{d}", spec, params, fn, d + 1, chi.M)


# ---------------------------------------------------------------------------
# characters of the centre

@lru_cache(maxsize=None)
def center_group(params: FieldParams, level: int) -> FiniteAbelianGroup:
    """Z mod Z meet K_level, a cyclic group of order (q+1) q^(level-1)."""
    p = params.at(level) if level > params.N else params
    Z = quotient_enumerate(center_spec(), level, p)
    return FiniteAbelianGroup(Z, identity_array(1), p, level, "Z")


@dataclass(frozen=True)
class CentralCharacter:
    """A character of Z = E^1 of finite level, z -> zeta_order^(index * log z)."""

    index: int
    level: int
    q: int

    @property
    def order_group(self) -> int:
        return (self.q + 1) * self.q ** (self.level - 1)

    def __mul__(self, other: "CentralCharacter") -> "CentralCharacter":
        L = max(self.level, other.level)
        return CentralCharacter(self.at_level(L).index + other.at_level(L).index, L, self.q).normal()

    def __pow__(self, n: int) -> "CentralCharacter":
        return CentralCharacter(self.index * n, self.level, self.q).normal()

    def normal(self) -> "CentralCharacter":
        return CentralCharacter(self.index % self.order_group, self.level, self.q)

    def at_level(self, L: int) -> "CentralCharacter":
        """The same character read on Z mod Z meet K_L."""
        if L < self.level:
            raise ValueError("cannot lower the level")
        if L == self.level:
            return self
        k = _generator_reduction(self.q, self.level, L)
        return CentralCharacter(self.index * k * self.q ** (L - self.level), L, self.q).normal()

    def is_trivial(self) -> bool:
        return self.index % self.order_group == 0


@lru_cache(maxsize=None)
def _generator_reduction(q: int, l: int, L: int) -> int:
    """log at level l of the level-L generator of Z, reduced mod p^l.

    The generators are those picked by center_group under the default
    non-square, which is what every CentralCharacter refers to.
    """
    params = make_params(q, L)
    gL = center_group(params, L).reps[center_group(params, L).gens[0]]
    Zl = center_group(params, l)
    return int(Zl.coords[Zl.labels_of(gL[None] % q ** l)][0, 0])


def central_character_fn(theta: CentralCharacter, params: FieldParams):
    """Array function: scalar-matrix arrays -> exponents mod the group order."""
    Zg = center_group(params, theta.level)
    n = theta.order_group
    # the group is cyclic: its single generator carries the log
    assert len(Zg.gens) == 1 and Zg.invariants[0] == n
    P = params.p ** theta.level

    def fn(A):
        lab = Zg.labels_of(A % P)
        return (Zg.coords[lab, 0] * theta.index) % n

    return fn, n


def residue_to_central(chi: ResidueCharacter, params: FieldParams) -> CentralCharacter:
    """A residue character of e1 as a level-1 character of Z, matching the generator used there."""
    F = residue_field(params)
    Zg = center_group(params, 1)
    g = Zg.reps[Zg.gens[0]]
    j = F.log[(int(g[0, 0, 0]), int(g[0, 0, 1]))]
    return CentralCharacter(chi.k * j, 1, params.p).normal()


def character_of_Z_from_array(exps: np.ndarray, M: int, level: int, params: FieldParams) -> CentralCharacter:
    """Identify the CentralCharacter with given values on the level-``level`` elements of Z."""
    Zg = center_group(params, level)
    n = (params.p + 1) * params.p ** (level - 1)
    lab = Zg.labels_of(Zg.reps)
    # value on the generator, rescaled to zeta_n
    e = int(exps[int(np.nonzero(lab == Zg.gens[0])[0][0])])
    if (e * n) % M:
        raise ValueError("values are not n-th roots of unity")
    return CentralCharacter(e * n // M, level, params.p).normal()


def decompose_central(theta: CentralCharacter) -> tuple[int, CentralCharacter]:
    """(k, mu) with theta = delta^k mu^2, delta the quadratic character of Z.

    theta = 1 gives (0, 1) and theta = delta gives (1, 1).  Otherwise k = 0
    when theta is a square.  When q = 3 mod 4 the quadratic character is
    itself a square, and a theta of odd index admits no such decomposition;
    that raises ValueError.
    """
    n = theta.order_group
    j = theta.index % n
    half = n // 2
    one = CentralCharacter(0, theta.level, theta.q)
    if j == 0:
        return 0, one
    if j == half:
        return 1, one
    for k in (0, 1):
        r = (j - k * half) % n
        if r % 2 == 0:
            return k, CentralCharacter(r // 2, theta.level, theta.q)
    raise ValueError(f"character of index {j} is not delta^k times a square (q = {theta.q})")


def quadratic_central(level: int, q: int) -> CentralCharacter:
    n = (q + 1) * q ** (level - 1)
    return CentralCharacter(n // 2, level, q)


# ---------------------------------------------------------------------------
# brute-force irreducible characters of the residue group

def _primes_1_mod(e: int, lower: int) -> Iterable[int]:
    l = (lower // e + 1) * e + 1
    while True:
        if is_prime(l):
            yield l
        l += e


def _nullspace_mod(A: np.ndarray, l: int) -> np.ndarray:
    """Basis (columns) of the right null space of A over F_l."""
    A = A.copy() % l
    rows, cols = A.shape
    piv = []
    r = 0
    for c in range(cols):
        nz = [i for i in range(r, rows) if A[i, c]]
        if not nz:
            continue
        i = nz[0]
        A[[r, i]] = A[[i, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, l) % l
        for i2 in range(rows):
            if i2 != r and A[i2, c]:
                A[i2] = (A[i2] - A[i2, c] * A[r]) % l
        piv.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in piv]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.int64)
        v[f] = 1
        for i, c in enumerate(piv):
            v[c] = (-A[i, f]) % l
        basis.append(v)
    return np.array(basis, dtype=np.int64).T.reshape(cols, len(basis))


def _solve_mod(B: np.ndarray, Y: np.ndarray, l: int) -> np.ndarray:
    """C with B C = Y over F_l, B of full column rank."""
    k = B.shape[1]
    aug = np.concatenate([B, Y], axis=1) % l
    rows = aug.shape[0]
    r = 0
    for c in range(k):
        i = next(i for i in range(r, rows) if aug[i, c])
        aug[[r, i]] = aug[[i, r]]
        aug[r] = aug[r] * pow(int(aug[r, c]), -1, l) % l
        for i2 in range(rows):
            if i2 != r and aug[i2, c]:
                aug[i2] = (aug[i2] - aug[i2, c] * aug[r]) % l
        r += 1
    return aug[:k, k:]


@dataclass
class BruteForceTable:
    prime: int                # the prime l the characters live mod
    exponent: int             # group exponent
    class_of: np.ndarray      # class id per element
    class_sizes: np.ndarray
    characters: list          # each a tuple of values mod l, one per class
    degrees: list


def brute_force_irreducibles(params: FieldParams) -> BruteForceTable:
    """All irreducible characters of K mod K_1, from class-algebra eigenvectors mod l.

    omega_chi(C_i) = |C_i| chi(g_i) / chi(1) satisfies
    omega(C_i) omega(C_j) = sum_k a_ijk omega(C_k), so the vectors omega are
    the common eigenvectors of the class multiplication matrices.
    """
    q, eps = params.p, params.epsilon
    G = residue_group(params)
    n = len(G)
    cls, reps = residue_classes(params)
    r = len(reps)
    sizes = np.bincount(cls, minlength=r)
    tbl = KeyTable(encode(G, q))
    Gi = mat_inv_unitary(G, q)
    _, inv_idx = tbl.find(encode(Gi, q))
    # element orders give the exponent
    order = np.ones(n, dtype=np.int64)
    ident = int(tbl.find(encode(identity_array(1), q))[1][0])
    cur = np.arange(n)
    while np.any(cur != ident):
        live = cur != ident
        prod = mat_mul(G[cur[live]], G[np.nonzero(live)[0]], eps, q)
        cur[live] = tbl.find(encode(prod, q))[1]
        order[live] += 1
    e = int(np.lcm.reduce(order))
    l = next(_primes_1_mod(e, n))
    # a[i, j, k] = #{x in C_i : x^-1 z_k in C_j}
    a = np.zeros((r, r, r), dtype=np.int64)
    for kk, zi in enumerate(reps):
        y = mat_mul(Gi, G[zi][None], eps, q)
        cj = cls[tbl.find(encode(y, q))[1]]
        np.add.at(a, (cls, cj, np.full(n, kk)), 1)
    spaces = [np.eye(r, dtype=np.int64)]
    for i in range(r):
        Mi = a[i] % l
        nxt = []
        for B in spaces:
            if B.shape[1] == 1:
                nxt.append(B)
                continue
            C = _solve_mod(B, Mi @ B % l, l)
            k = C.shape[0]
            for lam in range(l):
                N = _nullspace_mod((C - lam * np.eye(k, dtype=np.int64)) % l, l)
                if N.shape[1]:
                    nxt.append(B @ N % l)
        spaces = nxt
    if any(B.shape[1] != 1 for B in spaces) or len(spaces) != r:
        raise AssertionError("class algebra did not split into lines")
    ident_cls = int(cls[ident])
    inv_cls = np.zeros(r, dtype=np.int64)
    for kk, zi in enumerate(reps):
        inv_cls[kk] = cls[inv_idx[zi]]
    chars, degs = [], []
    for B in spaces:
        w = B[:, 0] % l
        w = w * pow(int(w[ident_cls]), -1, l) % l
        s = sum(int(w[kk]) * int(w[inv_cls[kk]]) * pow(int(sizes[kk]), -1, l) for kk in range(r)) % l
        d2 = n * pow(s, -1, l) % l
        d = next(d for d in range(1, math.isqrt(n) + 1) if d * d % l == d2)
        chars.append(tuple(int(w[kk]) * d * pow(int(sizes[kk]), -1, l) % l for kk in range(r)))
        degs.append(d)
    return BruteForceTable(l, e, cls, sizes, chars, degs)


def table_character_mod_l(sigma: CuspidalDatum, bf: BruteForceTable, params: FieldParams) -> tuple:
    """Class values of a Table-driven character mapped into F_l by a fixed root of unity."""
    q = params.p
    l = bf.prime
    g = next(g for g in range(2, l) if all(pow(g, (l - 1) // f, l) != 1 for f in _prime_factors(l - 1)))
    root = pow(g, (l - 1) // (q + 1), l)
    _, reps = residue_classes(params)
    out = []
    for zi in reps:
        out.append(sum(c * pow(root, e, l) for e, c in sigma.values[zi]) % l)
    return tuple(out)


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# checks on the residue group

def unipotent_sums(sigma: CuspidalDatum, params: FieldParams) -> list[CyclotomicValue]:
    """sum over u in the upper unipotent radical of chi(z u), one per central z."""
    q = params.p
    F = residue_field(params)
    G = residue_group(params)
    vals = residue_values(sigma.character, params)
    tbl = KeyTable(encode(G, q))
    out = []
    for z in F.e1:
        total = CyclotomicValue.integer(0)
        for y in range(q):
            A = np.array([[[z[0], z[1]], [(z[1] * y * params.epsilon) % q, (z[0] * y) % q]],
                          [[0, 0], [z[0], z[1]]]])
            # z * [[1, y sqrt(eps)], [0, 1]]
            ok, idx = tbl.find(encode(A % q, q))
            assert ok, "unipotent element not unitary"
            total = total + vals[int(idx)]
        out.append(total)
    return out


def residue_inner_product(f: ClassFunction, g: ClassFunction, params: FieldParams, subgroup: Pattern | None = None):
    A = residue_group(params)
    if subgroup is not None:
        A = A[subgroup.contains(A, 1, params)]
    s = pairing_sum(f, g, A, 1)
    return Fraction(s.to_int(), len(A))
