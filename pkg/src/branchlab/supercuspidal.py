"""Characters Psi_X, the K-representations S_d(X, zeta), generic tori data and rho.

Everything is an exact class function.  Lie elements are kept in the shape

    X = [[z s, u s], [v s, z s]],   s = sqrt(eps),

with z, u, v rationals.  The pairing behind Psi_X only sees the sqrt(eps)
components of k, because Re Tr(X Y) = eps (z (y11 + y22) + u y21 + v y12)
with y_ij the sqrt(eps)-parts of the entries of Y.

Torus elements are always read in model coordinates [[a, b], [c b, a]],
where c = gamma1 gamma2 for an anisotropic torus T_{gamma1, gamma2}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .abelian import AbelianCharacter, FiniteAbelianGroup
from .classfn import ClassFunction, CyclotomicValue, Terms, induce
from .cuspidal import (
    CentralCharacter,
    central_character_fn,
    character_of_Z_from_array,
    decompose_central,
    quadratic_central,
    residue_field,
)
from .groups import (
    INF,
    AnisotropicTorus,
    KeyTable,
    Monomial,
    NotInSubgroup,
    Pattern,
    Product,
    Torus,
    center_spec,
    coset_labels,
    encode,
    factor_product,
    identity_array,
    mat_inv_unitary,
    mat_mul,
    moy_prasad_spec,
    principal_congruence,
    quotient_enumerate,
)
from .scalars import FieldParams, LaurentScalar, e_inv, e_mul, frac_to_residue, vp_frac


class PrecisionError(ValueError):
    """The working precision is too small for the requested value."""


# ---------------------------------------------------------------------------
# the additive character

def psi_additive(x: LaurentScalar) -> CyclotomicValue:
    """psi(x) = psi'((x + conj x) / 2) with psi'(y) = exp(2 pi i {y / p})."""
    p, m = x.params.p, x.shift
    if x.abs_prec < 1:
        raise PrecisionError(f"need x modulo p^1, have it modulo p^{x.abs_prec}")
    M = p ** (m + 1)
    return CyclotomicValue.root(x.mantissa.a0 % M, M)


def _neg_val(x: Fraction, p: int) -> int:
    return 0 if x == 0 else max(0, -vp_frac(x, p))


@dataclass(frozen=True)
class LieDatum:
    """X = [[z s, u s], [v s, z s]] with s = sqrt(eps) and z, u, v in Q."""

    z: Fraction
    u: Fraction
    v: Fraction

    def __post_init__(self):
        for k in ("z", "u", "v"):
            object.__setattr__(self, k, Fraction(getattr(self, k)))

    def shift(self, p: int) -> int:
        return max(_neg_val(self.z, p), _neg_val(self.u, p), _neg_val(self.v, p))

    def conjugate(self, m: Monomial, p: int) -> "LieDatum":
        """m X m^-1."""
        z, u, v = self.z, self.u, self.v
        if m.swap:
            u, v = v, u
        k = m.e1 - m.e2
        return LieDatum(z, u * Fraction(p) ** k, v * Fraction(p) ** (-k))

    def psi_exponents(self, A: np.ndarray, level: int, params: FieldParams) -> tuple[np.ndarray, int]:
        """Exponents of psi(Tr(X (A - I))) as powers of zeta_n, n = p^(shift+1)."""
        p, eps = params.p, params.epsilon
        m = self.shift(p)
        if level < m + 1:
            raise PrecisionError(f"Psi_X needs precision {m + 1}, got {level}")
        n = p ** (m + 1)
        Z, U, V = (frac_to_residue(c * Fraction(p) ** m, p, m + 1) for c in (self.z, self.u, self.v))
        s = A[..., 1] % n  # sqrt(eps) parts of the entries
        val = Z * (s[..., 0, 0] + s[..., 1, 1]) + U * s[..., 1, 0] + V * s[..., 0, 1]
        return (eps * val) % n, n


@dataclass(frozen=True)
class DepthDElement(LieDatum):
    """An element of g_{0,-d} with nu(u) = -d, nu(v) > -d and nu(z) >= -d."""

    d: int = 1
    p: int = 3

    def __post_init__(self):
        super().__post_init__()
        p, d = self.p, self.d
        if d < 1:
            raise ValueError("depth must be positive")
        if self.u == 0 or vp_frac(self.u, p) != -d:
            raise ValueError(f"nu(u) must be -{d}")
        if self.v != 0 and vp_frac(self.v, p) <= -d:
            raise ValueError(f"nu(v) must exceed -{d}")
        if self.z != 0 and vp_frac(self.z, p) < -d:
            raise ValueError(f"nu(z) must be at least -{d}")

    @classmethod
    def from_lie(cls, X: LieDatum, d: int, p: int) -> "DepthDElement":
        return cls(X.z, X.u, X.v, d, p)

    @classmethod
    def nilpotent(cls, a: int, d: int, p: int) -> "DepthDElement":
        """X_{a pi^-d} = [[0, a pi^-d sqrt(eps)], [0, 0]] for a unit a."""
        if a % p == 0:
            raise ValueError("a must be a unit")
        return cls(Fraction(0), Fraction(a, p ** d), Fraction(0), d, p)

    @property
    def torus(self) -> Torus:
        """T(X) = T_{1, v/u} inside K."""
        return Torus(self.v / self.u, 0, 0, f"T(1,{self.v / self.u})")


def J_spec(d: int) -> Pattern:
    h = -(-d // 2)
    return Pattern(h, h, -(-(d + 1) // 2), h, f"J_{d}")


def Psi_X(X: LieDatum, d: int, params: FieldParams) -> ClassFunction:
    """k -> psi(Tr(X (k - I))) on J_d."""
    level = max(X.shift(params.p) + 1, d + 1)

    def fn(A, lv):
        e, n = X.psi_exponents(A, lv, params)
        return Terms.single(e, n)

    out = ClassFunction(f"Psi[{X.z},{X.u},{X.v}]", J_spec(d), params, fn, level, params.p ** X.shift(params.p) * params.p)
    out._degree = 1
    return out


def check_multiplicative(f: ClassFunction, level: int, pairs: np.ndarray | None = None, seed: int = 0) -> None:
    """Hard error unless f(xy) = f(x) f(y) on the given index pairs of the domain.

    ``pairs=None`` means all pairs.
    """
    params = f.params
    P, eps = params.p ** level, params.epsilon
    H = quotient_enumerate(f.domain, level, params)
    ex = f.evaluate(H, level)
    vals = np.zeros(len(H), dtype=np.int64)
    vals[ex.rows] = ex.exps
    M = ex.M
    n = len(H)
    if pairs is None:
        blocks = ((i, np.arange(n)) for i in range(n))
    else:
        blocks = ((int(i), np.array([j])) for i, j in pairs)
    tab = KeyTable(encode(H, P))
    batch_i, batch_j = [], []

    def flush():
        if not batch_i:
            return
        I, J = np.concatenate(batch_i), np.concatenate(batch_j)
        prod = mat_mul(H[I], H[J], eps, P)
        ok, idx = tab.find(encode(prod, P))
        if not np.all(ok):
            raise ValueError(f"{f.domain} is not closed under multiplication")
        if np.any((vals[I] + vals[J] - vals[idx]) % M):
            raise ValueError(f"{f.name} is not multiplicative on {f.domain}")
        batch_i.clear(), batch_j.clear()

    size = 0
    for i, J in blocks:
        batch_i.append(np.full(len(J), i)), batch_j.append(J)
        size += len(J)
        if size > 200_000:
            flush()
            size = 0
    flush()


# ---------------------------------------------------------------------------
# characters of torus-type groups

@dataclass(frozen=True)
class TorusCharacter:
    """A character of a Torus-type group acting on its element arrays.

    ``fn(A, lv)`` returns exponents of zeta_M.
    """

    name: str
    fn: Callable[[np.ndarray, int], np.ndarray]
    M: int
    level: int

    def __call__(self, A: np.ndarray, lv: int) -> np.ndarray:
        if lv < self.level:
            raise PrecisionError(f"{self.name} needs precision {self.level}, got {lv}")
        return np.asarray(self.fn(A, lv), dtype=np.int64) % self.M

    def times(self, other: "TorusCharacter", power: int = 1) -> "TorusCharacter":
        """self * other^power."""
        L = math.lcm(self.M, other.M)
        a, b = L // self.M, L // other.M
        return TorusCharacter(f"{self.name}*{other.name}^{power}",
                              lambda A, lv: self(A, lv) * a + power * other(A, lv) * b, L, max(self.level, other.level))

    def pullback(self, lam: Fraction, c: Fraction, p: int) -> "TorusCharacter":
        """Read [[a, b'], [c' b', a]] as the model element with b = lam b' (model constant c)."""
        lam, c = Fraction(lam), Fraction(c)

        def fn(A, lv):
            P = p ** lv
            lr, cr = frac_to_residue(lam, p, lv), frac_to_residue(lam * c, p, lv)
            B = np.empty_like(A)
            B[..., 0, 0, :] = A[..., 0, 0, :]
            B[..., 1, 1, :] = A[..., 0, 0, :]
            B[..., 0, 1, :] = (lr * A[..., 0, 1, :]) % P
            B[..., 1, 0, :] = (cr * A[..., 0, 1, :]) % P
            return self(B, lv)

        return TorusCharacter(f"{self.name}@{lam}", fn, self.M, self.level)


def abelian_torus_character(chi: AbelianCharacter) -> TorusCharacter:
    G = chi.group
    return TorusCharacter(f"{G.name}[{chi.index}]", lambda A, lv: chi(A), G.exponent, G.level)


def central_on_torus(theta: CentralCharacter, params: FieldParams) -> TorusCharacter:
    """[[a, b], [c b, a]] -> theta(a); for ZU this is theta extended trivially to U."""
    fnz, n = central_character_fn(theta, params)

    def fn(A, lv):
        S = np.zeros_like(A)
        S[..., 0, 0, :] = A[..., 0, 0, :]
        S[..., 1, 1, :] = A[..., 0, 0, :]
        return fnz(S)

    return TorusCharacter(f"theta{theta.index}", fn, n, theta.level)


def det_character(mu: CentralCharacter, params: FieldParams) -> Callable[[np.ndarray, int], np.ndarray]:
    """Array function g -> exponent of mu(det g), as a power of zeta_{mu order}."""
    fnz, n = central_character_fn(mu, params)

    def fn(A, lv):
        P = params.p ** lv
        det = (e_mul(A[..., 0, 0, :], A[..., 1, 1, :], params.epsilon, P)
               - e_mul(A[..., 0, 1, :], A[..., 1, 0, :], params.epsilon, P)) % P
        S = np.zeros_like(A)
        S[..., 0, 0, :] = det
        S[..., 1, 1, :] = det
        return fnz(S % params.p ** mu.level)

    return fn


# ---------------------------------------------------------------------------
# characters of T' H built from (X, zeta)

def check_agreement(spec: Product, X: LieDatum, zeta: TorusCharacter, params: FieldParams, level: int) -> None:
    """zeta = Psi_X on spec.torus meet spec.pattern, else ValueError."""
    T = quotient_enumerate(spec.torus, level, params)
    T = T[spec.pattern.contains(T, level, params)]
    e1, n1 = X.psi_exponents(T, level, params)
    e2 = zeta(T, level)
    L = math.lcm(n1, zeta.M)
    if np.any((e1 * (L // n1) - e2 * (L // zeta.M)) % L):
        raise ValueError(f"{zeta.name} and Psi_X disagree on {spec.torus.name} meet {spec.pattern.name}")


def inducing_character(spec: Product, X: LieDatum, zeta: TorusCharacter, params: FieldParams,
                       name: str | None = None, check: bool = True) -> ClassFunction:
    """tau h -> zeta(tau) Psi_X(h) on spec = torus * pattern."""
    p, eps = params.p, params.epsilon
    n1 = p ** (X.shift(p) + 1)
    M = math.lcm(n1, zeta.M)
    level = max(X.shift(p) + 1, zeta.level, 1)
    if check:
        check_agreement(spec, X, zeta, params, level)

    def fn(A, lv):
        ok, tau = factor_product(spec, A, lv, params)
        if not np.all(ok):
            raise NotInSubgroup(f"argument not in {spec.name}")
        P = p ** lv
        h = mat_mul(mat_inv_unitary(tau, P), A, eps, P)
        e1, _ = X.psi_exponents(h, lv, params)
        e2 = zeta(tau, lv)
        return Terms.single((e1 * (M // n1) + e2 * (M // zeta.M)) % M, M)

    out = ClassFunction(name or f"Psi[{X.z},{X.u},{X.v}]*{zeta.name}", spec, params, fn, level, M)
    out._degree = 1
    return out


def build_S_d(X: DepthDElement, zeta: TorusCharacter, params: FieldParams) -> ClassFunction:
    """Ind_{T(X) J_d}^K of the character zeta(tau) Psi_X(h)."""
    d = X.d
    H = Product(X.torus, J_spec(d), f"T(X)J_{d}")
    chi = inducing_character(H, X, zeta, params)
    out = induce(chi, principal_congruence(0), name=f"S_{d}[{X.z},{X.u},{X.v};{zeta.name}]")
    out.inducing = chi  # type: ignore[attr-defined]
    out.level = max(out.level, d + 1)
    return out


def nilpotent_S_d(theta: CentralCharacter, d: int, params: FieldParams, a: int = 1) -> ClassFunction:
    """S_d(X_{a pi^-d}, theta), theta a depth-zero character of Z extended trivially to U."""
    X = DepthDElement.nilpotent(a, d, params.p)
    return build_S_d(X, central_on_torus(theta, params), params)


# ---------------------------------------------------------------------------
# generic data

def delta_of(g: Monomial, y: Fraction) -> Fraction:
    t = (g.e2 - g.e1) // 2
    return 2 * t - y if g.swap else 2 * t + y


@dataclass
class GenericDatum:
    """An anisotropic torus with a G-generic character of depth r.

    Gamma = [[u s, v s gamma1], [v s gamma2, u s]] realizes phi on T_{s+}/T_{r+}.
    ``phi`` reads model-coordinate arrays and is trivial on T_{r+}.
    """

    torus: AnisotropicTorus
    r: Fraction
    u: Fraction
    v: Fraction
    phi: TorusCharacter
    theta: CentralCharacter
    params: FieldParams
    group: FiniteAbelianGroup | None = None
    index: int | None = None
    admissible: list = field(default_factory=list)

    @property
    def y(self) -> Fraction:
        return self.torus.y

    @property
    def s(self) -> Fraction:
        return self.r / 2

    @property
    def level(self) -> int:
        return self.phi.level

    @property
    def gamma(self) -> LieDatum:
        """Gamma in G."""
        T = self.torus
        return LieDatum(self.u, self.v * T.gamma1, self.v * T.gamma2)

    @property
    def gamma_model(self) -> LieDatum:
        """Gamma transported to the model torus [[a, b], [c b, a]]."""
        return LieDatum(self.u, self.v, self.v * self.torus.c)


def check_parity(torus: AnisotropicTorus, r: Fraction) -> None:
    r = Fraction(r)
    if r <= 0:
        raise ValueError("depth must be positive")
    if torus.ramified and (2 * r).denominator != 1 or torus.ramified and (2 * r) % 2 != 1:
        raise ValueError(f"parity: a ramified torus needs r in 1/2 + Z, got {r}")
    if not torus.ramified and r.denominator != 1:
        raise ValueError(f"parity: an unramified torus needs integral r, got {r}")


def generic_valuation(torus: AnisotropicTorus, v: Fraction, p: int) -> Fraction:
    """nu(Tr(Gamma H_alpha)) = nu(2 v sqrt(eps) sqrt(gamma1 gamma2))."""
    if v == 0:
        return Fraction(INF)
    return Fraction(vp_frac(2 * Fraction(v), p)) + Fraction(vp_frac(torus.c, p), 2)


def torus_pairing(u: Fraction, v: Fraction, c: Fraction) -> LieDatum:
    """A Lie datum with the same pairing as Gamma_{u,v} against model torus elements.

    On [[a, b], [c b, a]] the trace pairing is 2 u a + 2 v c b (times sqrt(eps));
    reading c b off the (2,1) entry would lose v(c) digits of b.
    """
    return LieDatum(u, 0, 2 * Fraction(v) * Fraction(c))


def torus_quotient(torus: AnisotropicTorus, r: Fraction, params: FieldParams) -> FiniteAbelianGroup:
    """T / T_{r+} in model coordinates, at the least level where T_{r+} contains T meet K_L."""
    plus = torus.filtration(r, params.p, plus=True)
    L = max(plus.amin, plus.bmin, 1)
    pr = params.at(max(params.N, L))
    T = quotient_enumerate(torus.model(), L, pr)
    S = quotient_enumerate(plus, L, pr)
    return FiniteAbelianGroup(T, S, pr, L, f"{torus.label}/{plus.name}")


def admissible_characters(torus: AnisotropicTorus, r: Fraction, u: Fraction, v: Fraction,
                          params: FieldParams) -> tuple[FiniteAbelianGroup, list[int]]:
    """Indices of characters of T/T_{r+} matching psi(Tr(Gamma (t - 1))) on T_{s+}."""
    G = torus_quotient(torus, r, params)
    L, p = G.level, params.p
    Ts = quotient_enumerate(torus.filtration(r / 2, p, plus=True), L, G.params)
    e, n = torus_pairing(u, v, torus.c).psi_exponents(Ts, L, params)
    E = G.exponent
    if np.any((e * E) % n):
        raise ValueError("Psi_Gamma on T_{s+} is not a character of T/T_{r+}")
    target = (e * E // n) % E
    C = G.coords[G.labels_of(Ts)]
    out = []
    for i in range(G.order):
        chi = G.character(i)
        if np.array_equal((C @ np.array(chi.exps, dtype=np.int64)) % E, target):
            out.append(i)
    return G, out


def make_generic(torus: AnisotropicTorus, r, v, params: FieldParams, u=0, choice: int = 0) -> GenericDatum:
    """A generic datum (T, y, r, phi) with Gamma = Gamma_{u, v}; phi is admissible number ``choice``."""
    r, u, v = Fraction(r), Fraction(u), Fraction(v)
    check_parity(torus, r)
    p = params.p
    if generic_valuation(torus, v, p) != -r:
        raise ValueError(f"not generic: nu(Tr(Gamma H_alpha)) = {generic_valuation(torus, v, p)} != {-r}")
    if u != 0 and vp_frac(u, p) < -r:
        raise ValueError("diagonal part of Gamma is deeper than -r")
    G, adm = admissible_characters(torus, r, u, v, params)
    if not adm:
        raise ArithmeticError("no character of T/T_{r+} extends Psi_Gamma")
    chi = G.character(adm[choice % len(adm)])
    phi = abelian_torus_character(chi)
    pr = G.params
    Z = quotient_enumerate(center_spec(), G.level, pr)
    theta = character_of_Z_from_array(chi(Z), G.exponent, G.level, pr)
    return GenericDatum(torus, r, u, v, phi, theta, pr, G, chi.index, adm)


def with_phi(datum: GenericDatum, phi: TorusCharacter, u: Fraction) -> GenericDatum:
    pr = datum.params
    Z = quotient_enumerate(center_spec(), phi.level, pr)
    theta = character_of_Z_from_array(phi(Z, phi.level), phi.M, phi.level, pr)
    return GenericDatum(datum.torus, datum.r, Fraction(u), datum.v, phi, theta, pr)


# ---------------------------------------------------------------------------
# rho

@dataclass
class RhoData:
    """rho(T, y, r, phi) as a class function.

    When ``frame`` is set, the true group is frame H frame^-1 for H the domain
    of ``character``, and chi_rho(x) = character(frame^-1 x frame).
    """

    datum: GenericDatum
    kind: str
    character: ClassFunction
    polarization: Product | None = None
    frame: Monomial | None = None
    phihat: ClassFunction | None = None
    checks: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return self.character.degree


def _frame(torus: AnisotropicTorus) -> tuple[Monomial | None, Fraction]:
    """The conjugator taking G_{y,s}T into K, and the point it moves y to."""
    if torus.gamma1 == 1:
        return None, torus.y
    return Monomial.eta(1), torus.y - 1


def _jump(torus: AnisotropicTorus, r: Fraction) -> bool:
    """G_{y,s} != G_{y,s+}: the Heisenberg case."""
    return not torus.ramified and Fraction(r).numerator % 2 == 0


def build_rho(datum: GenericDatum) -> RhoData:
    T, params = datum.torus, datum.params
    frame, y = _frame(T)
    s = datum.s
    model = T.model()
    X = datum.gamma_model
    level = max(datum.level, X.shift(params.p) + 1)
    params = params.at(max(params.N, level))
    if not _jump(T, datum.r):
        H = Product(model, moy_prasad_spec(y, s), f"G_{{{y},{s}}}T")
        chi = inducing_character(H, X, datum.phi, params, name=f"rho[{T.label},{datum.r}]")
        rho = RhoData(datum, "one-dimensional", chi, None, frame, chi)
    else:
        rho = _heisenberg(datum, model, X, y, params, frame)
    verify_rho(rho)
    return rho


def _quad_of_ratio(tau: np.ndarray, params: FieldParams) -> np.ndarray:
    """+-1: the quadratic character of e1 at the residue of (a+b)/(a-b)."""
    p, eps = params.p, params.epsilon
    F = residue_field(params)
    a, b = tau[..., 0, 0, :] % p, tau[..., 0, 1, :] % p
    x = e_mul((a + b) % p, e_inv((a - b) % p, eps, p), eps, p)
    look = np.full(p * p, -1, dtype=np.int64)
    for (x0, x1), j in F.log.items():
        look[x0 * p + x1] = j
    j = look[x[..., 0] * p + x[..., 1]]
    if np.any(j < 0):
        raise ValueError("eigenvalue ratio is not of norm one")
    return np.where(j % 2 == 0, 1, -1)


def _heisenberg(datum, model, X, y, params, frame) -> RhoData:
    """The q-dimensional rho on G_{y,s} T for an unramified torus with r even.

    Support and values follow from the Heisenberg-Weil structure: with
    R = T_s G_{y,s+} and phihat = phi * Psi_Gamma on T G_{y,s+},
      chi = q phihat         on Z R,
      chi = 0                on Z G_{y,s} outside Z R,
      chi(h g h^-1) = -quad(g) phihat(g)  for g in T G_{y,s+} with regular residue,
    where -quad is the Weil character of the anisotropic residue torus acting on
    the symplectic plane G_{y,s}/R.
    """
    p, eps = params.p, params.epsilon
    q = p
    r, s = datum.r, datum.s
    S, S1 = int(s), int(s) + 1
    L = int(r) + 1
    P = p ** L
    if y != 0 or model.c != 1:
        raise NotImplementedError("Heisenberg case is implemented for T_{1,1}-type tori")
    Ks, Ks1 = principal_congruence(S), principal_congruence(S1)
    TKs1 = Product(model, Ks1, "TG_{s+}")
    phihat = inducing_character(TKs1, X, datum.phi, params, name="phihat")
    big = Product(model, Ks, "G_{y,s}T")
    R = Product(model.with_bounds(S, S), Ks1, "R")
    ZR = Product(model.with_bounds(0, S), Ks1, "ZR")
    ZKs = Product(center_spec(), Ks, "ZG_{y,s}")
    # conjugation table over the regular part of T G_{s+}
    g0 = quotient_enumerate(TKs1, L, params)
    g0 = g0[~ZKs.contains(g0, L, params)]
    _, tau0 = factor_product(TKs1, g0, L, params)
    t0 = phihat(g0, L)
    sign = -_quad_of_ratio(tau0, params)
    _, _, hreps = coset_labels(R, Ks, L, params)
    keys, ex, sg = [], [], []
    for h in hreps:
        hi = mat_inv_unitary(h[None], P)
        c = mat_mul(mat_mul(h[None], g0, eps, P), hi, eps, P)
        keys.append(encode(c, P)), ex.append(t0.exps), sg.append(sign)
    keys, ex, sg = np.concatenate(keys), np.concatenate(ex), np.concatenate(sg)
    order = np.argsort(keys, kind="stable")
    keys, ex, sg = keys[order], ex[order], sg[order]
    dup = keys[1:] == keys[:-1]
    if np.any(ex[1:][dup] != ex[:-1][dup]) or np.any(sg[1:][dup] != sg[:-1][dup]):
        raise ValueError("Heisenberg character is not constant on K-conjugacy classes")
    first = np.concatenate([[True], ~dup])
    table = KeyTable(keys[first], np.nonzero(first)[0])
    M = t0.M

    def fn(A, lv):
        A = A % P
        ok, _ = factor_product(big, A, L, params)
        if not np.all(ok):
            raise NotInSubgroup("argument not in G_{y,s}T")
        n = len(A)
        inzr = ZR.contains(A, L, params)
        inzk = ZKs.contains(A, L, params)
        parts = []
        w = np.nonzero(inzr)[0]
        if len(w):
            parts.append(Terms.scatter(phihat(A[w], L).scaled(q), w, n))
        w = np.nonzero(~inzk)[0]
        if len(w):
            hit, idx = table.find(encode(A[w], P))
            if not np.all(hit):
                raise ValueError("element missing from the conjugation table")
            parts.append(Terms(n, w, ex[idx], sg[idx], M))
        return Terms.concat(parts, n) if parts else Terms.empty(n, M)

    chi = ClassFunction(f"rho[{datum.torus.label},{r}]", big, params, fn, L, M)
    pol = Product(model.with_bounds(S, S), Pattern(S1, S, S1, S1), "P'")
    rho = RhoData(datum, "heisenberg", chi, pol, frame, phihat)
    rho.heis = dict(R=R, ZR=ZR, ZKs=ZKs, Ks=Ks, Ks1=Ks1, level=L)  # type: ignore[attr-defined]
    return rho


def polarization_character(rho: RhoData, choice: int = 0) -> ClassFunction:
    """An extension of phihat|_R to the polarization P' = T_s * Pattern(s+1, s, s+1, s+1)."""
    pol = rho.polarization
    if pol is None:
        raise ValueError("only the Heisenberg case has a polarization")
    phihat = rho.phihat
    params = phihat.params
    p, eps = params.p, params.epsilon
    X = rho.datum.gamma_model
    L = rho.character.level
    P = p ** L
    S = pol.pattern.v12
    u0 = identity_array(1)[0]
    u0[0, 1] = (0, p ** S)
    # omega^p = Psi_Gamma(u0^p)
    up = identity_array(1).copy()
    up[0, 0, 1] = (0, p ** (S + 1) % P)
    ep, n = X.psi_exponents(up, L, params)
    if ep[0] % p:
        raise ArithmeticError("Psi_Gamma(u0^p) has no p-th root in the expected ring")
    n2 = n * p  # omega lives in zeta_{p n}
    w = (int(ep[0]) + choice * n) % n2  # omega = zeta_{n2}^w, omega^p = zeta_n^ep
    phi = rho.datum.phi
    M = math.lcm(n2, phi.M)

    def fn(A, lv):
        A = A % P
        ok, tau = factor_product(pol, A, L, params)
        if not np.all(ok):
            raise NotInSubgroup("argument not in the polarization")
        m = mat_mul(mat_inv_unitary(tau, P), A, eps, P)
        j = (m[:, 0, 1, 1] // p ** S) % p
        # m u0^-j = m * [[1, -j p^S s], [0, 1]]
        uj = np.broadcast_to(identity_array(1), m.shape).copy()
        uj[:, 0, 1, 1] = (-j * p ** S) % P
        k = mat_mul(m, uj, eps, P)
        a, _ = X.psi_exponents(k, L, params)
        e = a * (M // n) + phi(tau, L) * (M // phi.M) + j * w * (M // n2)
        return Terms.single(e % M, M)

    out = ClassFunction(f"chi'{choice}", pol, params, fn, L, M)
    out._degree = 1
    return out


# ---------------------------------------------------------------------------
# checks on rho

def _frame_conj(rho: RhoData, A: np.ndarray, lv: int) -> np.ndarray:
    from .groups import conj_monomial_array
    if rho.frame is None:
        return A
    B, _, ok = conj_monomial_array(A, rho.frame.inverse(), rho.datum.params.p, lv)
    if not np.all(ok):
        raise NotInSubgroup("argument not in the framed group")
    return B


def _same(t1: Terms, t2: Terms) -> bool:
    from .classfn import _distinct_rows, reduction_matrix
    M = math.lcm(t1.M, t2.M)
    diff = t1.dense(M) - t2.dense(M)
    rows, _ = _distinct_rows(diff)
    red = rows @ reduction_matrix(M) if M > 1 else rows.sum(axis=1, keepdims=True)
    return not np.any(red)


def verify_rho(rho: RhoData) -> dict:
    """Res to G_{y,s+} is deg * Psi_Gamma, Res to Z T_{0+} is deg * phi, and the degree is right.

    These are exact identities in the frame where G_{y,s}T sits in K.
    """
    chi = rho.character
    params = chi.params
    d = rho.datum
    q = params.p
    deg = chi.degree
    expected_deg = q if rho.kind == "heisenberg" else 1
    L = chi.level
    frame, y = _frame(d.torus)
    X = d.gamma_model
    plus = moy_prasad_spec(y, d.s, plus=True)
    Kp = quotient_enumerate(plus, L, params)
    e, n = X.psi_exponents(Kp, L, params)
    ok1 = _same(chi(Kp, L), Terms.single(e, n).scaled(deg))
    Zt = quotient_enumerate(d.torus.model().with_bounds(0, 1), L, params)
    Zt = Zt[chi.domain.contains(Zt, L, params)]
    ok2 = _same(chi(Zt, L), Terms.single(d.phi(Zt, L), d.phi.M).scaled(deg))
    checks = {"degree": deg == expected_deg, "Psi_Gamma-isotypic on G_{y,s+}": ok1,
              "phi-isotypic on Z T_{0+}": ok2}
    for k, v in checks.items():
        if not v:
            raise ArithmeticError(f"rho fails the identity: {k}")
    rho.checks.update(checks)
    return checks


def twist_identity_check(datum: GenericDatum, mu: CentralCharacter) -> dict:
    """Compare chi_rho(phi) with (mu o det) * chi_rho(phi~), phi~ = phi * (mu o det)^-1.

    Also records whether the decomposition of theta yields phi~ with central
    character 1 or delta.
    """
    params = datum.params.at(max(datum.params.N, mu.level, datum.level))
    p = params.p
    lam = det_character(mu, params)
    n = mu.order_group
    lam_T = TorusCharacter(f"mu{mu.index}(det)", lambda A, lv: lam(A, lv), n, mu.level)
    phit = datum.phi.times(lam_T, -1)
    if phit.level < datum.level:
        phit = TorusCharacter(phit.name, phit.fn, phit.M, datum.level)
    # Gamma~ differs from Gamma by a central shift of the diagonal
    m = X_shift = max(int(math.ceil(datum.r)), 1)
    Ts = quotient_enumerate(datum.torus.filtration(datum.s, p, plus=True), max(datum.level, X_shift + 1), params)
    lv = max(datum.level, X_shift + 1)
    target = phit(Ts, lv)
    found = None
    for j in range(p ** m):
        u2 = datum.u - Fraction(j, p ** m)
        e, nn = torus_pairing(u2, datum.v, datum.torus.c).psi_exponents(Ts, lv, params)
        Lc = math.lcm(nn, phit.M)
        if np.array_equal(e * (Lc // nn) % Lc, target * (Lc // phit.M) % Lc):
            found = u2
            break
    report = {"gamma~ found": found is not None}
    if found is None:
        return report
    d2 = with_phi(datum, phit, found)
    rho1, rho2 = build_rho(datum), build_rho(d2)
    c1, c2 = rho1.character, rho2.character
    lvl = max(c1.level, c2.level, mu.level)
    A = quotient_enumerate(c1.domain, lvl, params)
    t1 = c1(A, lvl)
    t2 = c2(A, lvl).times_exps(lam(A, lvl), n)
    report["chi_rho = lambda chi_rho~"] = _same(t1, t2)
    report["central character of phi~"] = d2.theta
    return report


def reduce_central(datum: GenericDatum) -> dict:
    """theta = delta^k mu^2; twisting by mu o det leaves central character delta^k."""
    try:
        k, mu = decompose_central(datum.theta)
    except ValueError as exc:
        return {"decomposable": False, "reason": str(exc)}
    mu = mu.at_level(max(mu.level, datum.level))
    rep = twist_identity_check(datum, mu)
    rep["decomposable"] = True
    rep["k"] = k
    want = quadratic_central(datum.theta.level, datum.theta.q) if k else CentralCharacter(0, datum.theta.level, datum.theta.q)
    got = rep.get("central character of phi~")
    rep["central character in {1, delta}"] = got is not None and (got * (want ** -1)).is_trivial()
    return rep


def torus_multiplicities(rho: RhoData) -> list[Fraction]:
    """<Res_T chi_rho, eta>_T over the characters eta of T / T meet K_L.

    Integrality here pins down the Weil sign in the Heisenberg case.
    """
    chi = rho.character
    params, L = chi.params, chi.level
    T = quotient_enumerate(rho.datum.torus.model(), L, params)
    G = FiniteAbelianGroup(T, identity_array(1), params, L, "T")
    vals = chi(T, L)
    out = []
    for i in range(G.order):
        e = G.character(i)(T)
        t = vals.times_exps((-e) % G.exponent, G.exponent)
        c = np.zeros(t.M, dtype=np.int64)
        np.add.at(c, t.exps, t.coefs)
        s = CyclotomicValue.from_counts(c, t.M)
        if not s.is_rational():
            out.append(None)
        else:
            out.append(Fraction(s.to_int(), len(T)))
    return out
