"""Exhaustive checks of the subgroup identities behind the branching rules.

Each check runs two routes: the symbolic patterns the rest of the package
uses, and a direct one that conjugates integer lifts of enumerated elements
by a monomial matrix, keeping a power-of-p scale so entries of negative
valuation stay exact.  The identities hold for the GL_2 lattice groups with
the same valuation bounds, so any integer lift of a residue class may be
tested.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .groups import (
    AnisotropicTorus, BK_spec, Bop_spec, BopK_spec, K_spec, KeyTable, Monomial, Pattern, Product,
    center_spec, conj_monomial_array, decompose_Bop_T_array, encode, is_unitary_array,
    mat_mul, quotient_enumerate,
)
from .scalars import FieldParams, _sqrt_F, frac_to_residue, vp_frac

WIDE = 12  # working modulus exponent for the scaled integer lifts


def _ceil(x) -> int:
    return math.ceil(Fraction(x))


def _conj_scaled(A: np.ndarray, m: Monomial, p: int) -> tuple[np.ndarray, int]:
    """(Z, S) with m A m^-1 = p^-S Z, for integer matrices A."""
    s = m.shifts()
    if m.swap:
        A = A[..., ::-1, ::-1, :]
    S = max(0, int(-s.min()))
    out = np.empty_like(A)
    P = p ** WIDE
    for i in range(2):
        for j in range(2):
            out[..., i, j, :] = (A[..., i, j, :] * p ** (int(s[i, j]) + S)) % P
    return out, S


def _val_ok(x: np.ndarray, bound: int, p: int) -> np.ndarray:
    """v(x) >= bound for scaled entries x (pairs), bound already shifted by the scale."""
    if bound <= 0:
        return np.ones(x.shape[:-1], dtype=bool)
    if bound >= WIDE:
        return np.all(x % p ** WIDE == 0, axis=-1)
    return np.all(x % p ** bound == 0, axis=-1)


def _pattern_ok(Z: np.ndarray, S: int, bounds, p: int) -> np.ndarray:
    """p^-S Z satisfies the valuation bounds of a (possibly non-integral) pattern group."""
    P = p ** WIDE
    one = np.array([p ** S, 0]) if S < WIDE else np.zeros(2, dtype=np.int64)
    b11, b12, b21, b22 = bounds
    ok = _val_ok((Z[..., 0, 0, :] - one) % P, b11 + S, p)
    ok &= _val_ok(Z[..., 0, 1, :], b12 + S, p)
    ok &= _val_ok(Z[..., 1, 0, :], b21 + S, p)
    ok &= _val_ok((Z[..., 1, 1, :] - one) % P, b22 + S, p)
    return ok


def _model_coords(model, level: int, params: FieldParams) -> tuple[np.ndarray, np.ndarray]:
    """(a, b) of [[a, b], [c b, a]] in the model torus mod p^level, lifted digit by digit."""
    p, eps = params.p, params.epsilon
    digits = np.array(np.meshgrid(*[np.arange(p)] * 4, indexing="ij")).reshape(4, -1).T
    cur = np.zeros((1, 4), dtype=np.int64)
    for n in range(level):
        P1 = p ** (n + 1)
        cr = frac_to_residue(model.c, p, n + 1)
        kept = []
        for lo in range(0, len(cur), 8192):
            cand = (cur[lo:lo + 8192, None, :] + p ** n * digits[None]).reshape(-1, 4)
            A = np.zeros((len(cand), 2, 2, 2), dtype=np.int64)
            A[:, 0, 0] = A[:, 1, 1] = cand[:, :2]
            A[:, 0, 1] = cand[:, 2:]
            A[:, 1, 0] = (cr * cand[:, 2:]) % P1
            kept.append(cand[is_unitary_array(A, eps, P1) & model.contains(A, n + 1, params)])
        cur = np.concatenate(kept)
    return cur[:, :2], cur[:, 2:]


def torus_elements(torus: AnisotropicTorus, level: int, params: FieldParams, plus: bool = False) -> tuple[np.ndarray, int]:
    """Norm-one lifts of T mod (T meet model K_level) in true coordinates, scaled.

    Returns (Z, S) with elements p^-S Z = [[a, b g1], [b g2, a]].  With
    ``plus`` only elements of T_{0+} are returned.
    """
    p, eps = params.p, params.epsilon
    P = p ** WIDE
    model = torus.model() if not plus else torus.filtration(0, p, plus=True)
    a, b = _model_coords(model, level, params)
    c = frac_to_residue(torus.c, p, WIDE)
    nrm = (a[:, 0] ** 2 - eps * a[:, 1] ** 2 + c * (b[:, 0] ** 2 - eps * b[:, 1] ** 2)) % P
    u = np.array([_sqrt_F(pow(int(n), -1, P), p, WIDE) for n in nrm], dtype=np.int64)
    a = (a * u[:, None]) % P
    b = (b * u[:, None]) % P
    v1, v2 = vp_frac(torus.gamma1, p), vp_frac(torus.gamma2, p)
    S = max(0, -v1, -v2)
    g1 = frac_to_residue(torus.gamma1 * Fraction(p) ** S, p, WIDE)
    g2 = frac_to_residue(torus.gamma2 * Fraction(p) ** S, p, WIDE)
    Z = np.zeros((len(a), 2, 2, 2), dtype=np.int64)
    Z[:, 0, 0] = Z[:, 1, 1] = (a * p ** S) % P
    Z[:, 0, 1] = (b * g1) % P
    Z[:, 1, 0] = (b * g2) % P
    return Z, S


def _scaled_mul(X: np.ndarray, Y: np.ndarray, eps: int, p: int) -> np.ndarray:
    return mat_mul(X, Y, eps, p ** WIDE)


def bk_identities(d: int, params: FieldParams, level: int) -> dict:
    """K meet K^{eta^d} = BK_d and (BK_d)^{eta^-d} = B^op K_d, exhaustively mod K_level."""
    p = params.p
    K = quotient_enumerate(K_spec(), level, params)
    eta = Monomial.eta(d)
    # k lies in eta K eta^-1 iff eta^-1 k eta is integral
    _, _, integral = conj_monomial_array(K, eta.inverse(), p, level)
    bk = BK_spec(d).contains(K, level, params)
    pat = K_spec().conjugate(eta)
    first = bool(np.array_equal(integral, bk)) and bool(np.array_equal(pat.contains(K, level, params), bk))
    # image of BK_d under eta^-d ... eta^d against B^op K_d
    BK = K[bk]
    img, lv, ok = conj_monomial_array(BK, Monomial.eta(-d), p, level)
    Pl = p ** lv
    img_keys = np.unique(encode(img[ok] % Pl, Pl))
    target = quotient_enumerate(BopK_spec(d), lv, params)
    second = bool(ok.all()) and np.array_equal(img_keys, np.unique(encode(target, Pl)))
    return {"K & K^eta^d = BK_d": first, "(BK_d)^eta^-d = BopK_d": bool(second),
            "|BK_d|": int(bk.sum()), "level": level}


def bop_t_decomposition(c: Fraction, params: FieldParams, level: int) -> dict:
    """K = B^op T_{1,c} (or B^op T u B^op w T), checked on every element mod K_level."""
    p, eps = params.p, params.epsilon
    K = quotient_enumerate(K_spec(), level, params)
    L, tau, uw, lv = decompose_Bop_T_array(K, c, level, params)
    P = p ** lv
    from .groups import Torus

    ok = Bop_spec().contains(L, lv, params) & Torus(Fraction(c)).contains(tau, lv, params)
    ok &= is_unitary_array(L, eps, P) & is_unitary_array(tau, eps, P)
    W = np.zeros((2, 2, 2), dtype=np.int64)
    W[0, 1, 0] = W[1, 0, 0] = 1
    prod = mat_mul(L, tau, eps, P)
    prod[uw] = mat_mul(mat_mul(L[uw], W[None], eps, P), tau[uw], eps, P)
    ok &= np.all((prod - K) % P == 0, axis=(1, 2, 3))
    return {"all factor": bool(ok.all()), "w coset": int(uw.sum()), "elements": len(K), "level": lv}


def _delta(g: Monomial, y: Fraction) -> Fraction:
    t = (g.e2 - g.e1) // 2
    return 2 * t - y if g.swap else 2 * t + y


def intersection_factorisation(torus: AnisotropicTorus, s: Fraction, g: Monomial, params: FieldParams,
                               level: int = 3) -> dict:
    """K meet (G_{y,s} T)^g against (K meet G_{y,s}^g)(K meet T^g), exhaustively mod K_level.

    The direct route tests g^-1 k g tau^-1 in G_{y,s} for tau over T / T_s;
    the symbolic route is the Product spec used to build Mackey components.
    """
    p, eps = params.p, params.epsilon
    y, s = torus.y, Fraction(s)
    raw = (_ceil(s), _ceil(s - y), _ceil(s + y), _ceil(s))
    delta = _delta(g, y)
    top = _ceil(s + delta)
    if top > level:
        raise ValueError(f"K_{level} is not inside the conjugated group; need level {top}")
    K = quotient_enumerate(K_spec(), level, params)
    Z, S = _conj_scaled(K, g.inverse(), p)
    Ts = torus.filtration(s, p)
    Tz, St = torus_elements(torus, max(1, Ts.amin, Ts.bmin), params)
    lhs = np.zeros(len(K), dtype=bool)
    for tz in Tz:
        # tau ranges over T / T_s, so tau and tau^-1 cover the same cosets
        lhs |= _pattern_ok(_scaled_mul(Z, tz[None], eps, p), S + St, raw, p)
    torus2, _ = torus.intersect_K(g, p)
    pattern = Pattern(_ceil(s), max(0, _ceil(s - delta)), _ceil(s + delta), _ceil(s))
    sym = Product(torus2, pattern).contains(K, level, params)
    # the product of the two intersections, built as a set
    in_G = _pattern_ok(Z, S, raw, p)
    Tk = _torus_image(torus, g, level, params)
    P = p ** level
    G_el = K[in_G]
    keys = np.unique(np.concatenate([encode(mat_mul(G_el, t[None], eps, P), P) for t in Tk]))
    prod_mask = KeyTable(keys).find(encode(K, P))[0]
    return {
        "direct = product of intersections": bool(np.array_equal(lhs, prod_mask)),
        "direct = symbolic": bool(np.array_equal(lhs, sym)),
        "size": int(lhs.sum()),
        "level": level,
    }


def _torus_image(torus: AnisotropicTorus, g: Monomial, level: int, params: FieldParams, plus: bool = False) -> np.ndarray:
    """K meet T^g (or T_{0+}^g) mod K_level, from conjugating torus elements."""
    p = params.p
    t = (g.e2 - g.e1) // 2
    # entries move by up to 2t places, plus one for a non-integral gamma
    extra = 1 if min(vp_frac(torus.gamma1, p), vp_frac(torus.gamma2, p)) < 0 else 0
    Tz, St = torus_elements(torus, level + 2 * abs(t) + extra, params, plus=plus)
    Z, S = _conj_scaled(Tz, g, p)
    S += St
    P = p ** level
    integral = np.all(Z % p ** S == 0, axis=(1, 2, 3)) if S else np.ones(len(Z), dtype=bool)
    out = (Z[integral] // p ** S) % P
    return np.unique(out, axis=0) if len(out) else out


def z_isotypic(torus: AnisotropicTorus, g: Monomial, params: FieldParams, level: int = 3) -> dict:
    """K meet T^g = Z (K meet T_{0+}^g) as sets mod K_level."""
    p, eps = params.p, params.epsilon
    P = p ** level
    full = _torus_image(torus, g, level, params)
    plus = _torus_image(torus, g, level, params, plus=True)
    Zc = quotient_enumerate(center_spec(), level, params)
    prod = np.unique(np.concatenate([encode(mat_mul(Zc, x[None], eps, P), P) for x in plus]))
    torus2, _ = torus.intersect_K(g, p)
    sym = quotient_enumerate(torus2, level, params)
    return {
        "K & T^g = Z (K & T_0+^g)": bool(np.array_equal(np.unique(encode(full, P)), prod)),
        "direct = symbolic": bool(np.array_equal(np.unique(encode(full, P)), np.unique(encode(sym, P)))),
        "size": len(full),
        "level": level,
    }
