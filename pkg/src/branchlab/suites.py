"""Verification suites driven by a RunConfig, each filling a ReportDocument."""
from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import groups
from .classfn import CyclotomicValue, double_coset_reps, equal_pointwise, induce, inner_product, mackey_pairing
from .cuspidal import all_cuspidal, brute_force_irreducibles, residue_values, table_character_mod_l, unipotent_sums
from .groups import K_spec, Monomial, quotient_enumerate, quotient_order, standard_tori
from .identities import bk_identities, bop_t_decomposition, intersection_factorisation, z_isotypic
from .report import ReportDocument
from .scalars import TruncatedScalar, e_mul, e_norm, hensel_sqrt, make_params, norm, norm_one_array, solve_norm, vp_frac
from .supercuspidal import build_rho, check_parity, make_generic, nilpotent_S_d, polarization_character, torus_multiplicities
from .verifier import (
    BranchingReport,
    depth_zero_component,
    depth_zero_theta,
    observed_depth,
    positive_components,
    theta_of,
    verify_depth_zero_iso,
    verify_K2r_identity,
    verify_key_identification,
    verify_positive_iso,
    _level_ok,
)

log = logging.getLogger("branchlab")

SUITE_NAMES = ("ring", "group", "depth-zero", "positive-depth", "k2r")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    p: int = 3
    precision: int | None = None
    suite: str = "ring"
    torus: str = "T1w"
    r: Fraction = Fraction(1, 2)
    d_max: int = 2
    cuspidal: str = "all"
    format: str = "json"
    cache_dir: str | None = None
    jobs: int = 1
    cap: int = groups.DEFAULT_CAP

    def echo(self) -> dict:
        d = asdict(self)
        d["r"] = str(self.r)
        d.pop("cache_dir")  # cold and warm runs must report the same config
        return d


def required_precision(cfg: RunConfig) -> int:
    """Least N the selected suites need."""
    need = {"ring": 3, "group": 3, "depth-zero": cfg.d_max + 2, "positive-depth": max(4, cfg.d_max + 1),
            "k2r": max(4, cfg.d_max + 1)}
    names = SUITE_NAMES if cfg.suite == "all" else (cfg.suite,)
    return max(need[n] for n in names)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.suite not in SUITE_NAMES + ("all",):
        raise ConfigError(f"unknown suite {cfg.suite!r}")
    if cfg.format not in ("json", "markdown"):
        raise ConfigError(f"unknown format {cfg.format!r}")
    if cfg.d_max < 1:
        raise ConfigError("d_max must be at least 1")
    try:
        make_params(cfg.p, 1)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.jobs < 1 or cfg.cap < 1:
        raise ConfigError("--jobs and --cap must be positive")
    tori = standard_tori(cfg.p, make_params(cfg.p, 1).epsilon)
    if cfg.torus not in tori:
        raise ConfigError(f"unknown torus {cfg.torus!r}; choose from {sorted(tori)}")
    if cfg.suite in ("positive-depth", "k2r", "all"):
        try:
            check_parity(tori[cfg.torus], Fraction(cfg.r))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if cfg.cuspidal != "all":
        try:
            int(cfg.cuspidal)
        except ValueError:
            raise ConfigError("--cuspidal takes an index or 'all'") from None
    need = required_precision(cfg)
    if cfg.precision is None:
        cfg.precision = need
    elif cfg.precision < need:
        log.warning("precision %d is below the budget for suite %s; raising N to %d", cfg.precision, cfg.suite, need)
        cfg.precision = need
    return cfg


def _merge(doc: ReportDocument, suite: str, rep: BranchingReport) -> None:
    for c in rep.checks:
        doc.add(f"{suite}: {c.name}", c.anchor, c.expected, c.computed, c.passed)


# ---------------------------------------------------------------------------
# ring

def _units_E(p: int, N: int) -> np.ndarray:
    P = p ** N
    a = np.array(np.meshgrid(np.arange(P), np.arange(P), indexing="ij")).reshape(2, -1).T
    return a[(a[:, 0] % p != 0) | (a[:, 1] % p != 0)]


def sqrt_oracle_agrees(p: int, N: int) -> bool:
    """hensel_sqrt against a search over every element of O_E / p^N."""
    par = make_params(p, N)
    P = p ** N
    allE = np.array(np.meshgrid(np.arange(P), np.arange(P), indexing="ij")).reshape(2, -1).T
    sq = e_mul(allE, allE, par.epsilon, P)
    keys = sq[:, 0] * P + sq[:, 1]
    for u0, u1 in _units_E(p, N):
        roots = allE[keys == u0 * P + u1]
        r = hensel_sqrt(TruncatedScalar(int(u0), int(u1), par))
        if r is None:
            if len(roots):
                return False
        elif not np.any(np.all(roots == (r.a0, r.a1), axis=1)):
            return False
    return True


def norm_oracle_agrees(p: int, N: int) -> bool:
    """solve_norm hits every unit of O_F / p^N, and its answers are norms found by search."""
    par = make_params(p, N)
    P = p ** N
    U = _units_E(p, N)
    norms = set(np.unique(e_norm(U, par.epsilon, P)).tolist())
    for t in range(P):
        if t % p == 0:
            continue
        a = solve_norm(TruncatedScalar(t, 0, par))
        if norm(a) % P != t or t not in norms:
            return False
    return True


def ring_suite(cfg: RunConfig, doc: ReportDocument) -> None:
    p = cfg.p
    q = p
    for d in (1, 2, 3):
        count = len(norm_one_array(make_params(p, d), d))
        doc.add(f"ring: [E^1 : E^1 & (1 + p^{d} O_E)]", "index of the norm-one congruence filtration",
                (q + 1) * q ** (d - 1), count, count == (q + 1) * q ** (d - 1))
    for N in (1, 2):
        ok = sqrt_oracle_agrees(p, N)
        doc.add(f"ring: hensel_sqrt vs residue search, N={N}", "squareness of units", True, ok, ok)
        ok = norm_oracle_agrees(p, N)
        doc.add(f"ring: solve_norm vs residue search, N={N}", "surjectivity of the norm on units", True, ok, ok)


# ---------------------------------------------------------------------------
# groups and the residue layer

def group_suite(cfg: RunConfig, doc: ReportDocument) -> None:
    p = cfg.p
    q = p
    par = make_params(p, cfg.precision)
    order = q * (q - 1) * (q + 1) ** 2
    res = len(quotient_enumerate(K_spec(), 1, par))
    doc.add("group: |U(1,1)(F_q)|", "order of the residue group", order, res, res == order)
    for d in range(0, 3):
        want = order * q ** (4 * d)
        if want > cfg.cap:
            continue
        got = len(quotient_enumerate(K_spec(), d + 1, par, cap=cfg.cap))
        doc.add(f"group: |K/K_{d + 1}| by enumeration", "order of K mod K_{d+1}", want, got, got == want)
    for n in (1, 2, 3):
        f = groups.kernel_fiber_size(par.at(max(cfg.precision, n + 1)), n)
        doc.add(f"group: fiber of K_{n}/K_{n + 1}", "order of K mod K_{d+1}", q ** 4, f, f == q ** 4)
    _table_checks(par.at(1), doc, brute=(q == 3))
    if quotient_order(par, 3) <= min(cfg.cap, 1_000_000):
        _subgroup_checks(par.at(max(3, cfg.precision)), doc)


def _table_checks(par, doc: ReportDocument, brute: bool) -> None:
    q = par.p
    cs = all_cuspidal(par)
    distinct = {tuple(str(v) for v in residue_values(c.character, par)) for c in cs}
    doc.add("group: number of distinct cuspidal characters", "cuspidal table", (q + 1) * q // 2, len(distinct),
            len(distinct) == (q + 1) * q // 2)
    for c in cs:
        tag = f"group: sigma({c.alpha.k},{c.beta.k})"
        deg = c.character.degree
        doc.add(f"{tag} degree", "cuspidal table", q - 1, deg, deg == q - 1)
        nrm = inner_product(c.character, c.character, level=1)
        doc.add(f"{tag} <chi, chi>", "cuspidal table", 1, nrm, nrm == 1)
        zero = all(v == CyclotomicValue.integer(0) for v in unipotent_sums(c, par))
        doc.add(f"{tag} unipotent sums vanish", "cuspidality", True, zero, zero)
    if brute:
        bf = brute_force_irreducibles(par)
        found = {table_character_mod_l(c, bf, par) for c in cs}
        ok = found <= set(bf.characters)
        doc.add("group: table characters are brute-force irreducibles", "cuspidal table", True, ok, ok)
        n_q1 = sum(dg == q - 1 for dg in bf.degrees)
        doc.add("group: brute-force irreducibles of degree q-1", "cuspidal table", len(found), n_q1,
                n_q1 >= len(found))


def _subgroup_checks(par, doc: ReportDocument) -> None:
    T = standard_tori(par.p, par.epsilon)
    for d in (1, 2):
        out = bk_identities(d, par, 3)
        for k in ("K & K^eta^d = BK_d", "(BK_d)^eta^-d = BopK_d"):
            doc.add(f"group: d={d} {k}", "subgroups of K meeting conjugates of K", True, out[k], out[k])
    for name, tor in T.items():
        out = bop_t_decomposition(tor.c, par, 3)
        doc.add(f"group: K = B^op T u B^op w T for {name} (model torus)", "B^op T decomposition of K", True,
                out["all factor"], out["all factor"])
        want_w = tor.ramified
        doc.add(f"group: w coset used for {name}", "B^op T decomposition of K", want_w, out["w coset"] > 0,
                (out["w coset"] > 0) == want_w)
    for name, tor in T.items():
        s = Fraction(1, 4) if tor.ramified else Fraction(1, 2)
        gs = [Monomial.alpha(0), Monomial.alpha(1)] + ([Monomial.alpha_w(1)] if tor.ramified else [])
        for g in gs:
            lab = "I" if g == Monomial.alpha(0) else ("alpha^1 w" if g.swap else "alpha^1")
            try:
                out = intersection_factorisation(tor, s, g, par, 3)
            except ValueError as exc:
                log.info("factorisation for %s g=%s skipped: %s", name, lab, exc)
            else:
                for k in ("direct = product of intersections", "direct = symbolic"):
                    doc.add(f"group: {name} s={s} g={lab} intersection: {k}", "factorisation of K meet (G T)^g",
                            True, out[k], out[k])
            if g != Monomial.alpha(0) or tor.y != 0:
                out = z_isotypic(tor, g, par, 3)
                for k in ("K & T^g = Z (K & T_0+^g)", "direct = symbolic"):
                    doc.add(f"group: {name} g={lab} {k}", "K meet T^g is Z times its pro-p part", True, out[k], out[k])


# ---------------------------------------------------------------------------
# depth zero

def _sigmas(cfg: RunConfig, par):
    cs = all_cuspidal(par.at(1))
    if cfg.cuspidal == "all":
        return cs
    i = int(cfg.cuspidal)
    if not 0 <= i < len(cs):
        raise ConfigError(f"cuspidal index {i} out of range 0..{len(cs) - 1}")
    return [cs[i]]


def depth_zero_suite(cfg: RunConfig, doc: ReportDocument) -> None:
    par = make_params(cfg.p, cfg.precision)
    q = cfg.p
    rep = BranchingReport(cfg.echo())
    sigmas = _sigmas(cfg, par)
    for sig in sigmas:
        for d in range(1, cfg.d_max + 1):
            verify_depth_zero_iso(sig, d, par, rep, jobs=cfg.jobs, pointwise=_level_ok(par, d + 1))
    # components of sigmas with the same theta coincide
    by_theta = defaultdict(list)
    for sig in all_cuspidal(par.at(1)) if cfg.cuspidal == "all" else sigmas:
        by_theta[theta_of(sig, par).index].append(sig)
    for th, group in sorted(by_theta.items()):
        for d in range(1, cfg.d_max + 1):
            if len(group) < 2 or not _level_ok(par, d + 1):
                continue
            K = quotient_enumerate(K_spec(), d + 1, par)
            base = depth_zero_component(group[0], d)
            same = all(equal_pointwise(base, depth_zero_component(s, d), K, d + 1, cfg.jobs) for s in group[1:])
            rep.check(f"theta{th} d={d}: components of {len(group)} sigmas agree", "independence of sigma given theta",
                      True, same)
    # the S_d family
    thetas = sorted({theta_of(s, par).index: theta_of(s, par) for s in sigmas}.items())
    for _, theta in thetas:
        for d in range(1, cfg.d_max + 1):
            S = nilpotent_S_d(theta, d, par)
            tag = f"S_{d}(X, theta{theta.index})"
            rep.check(f"{tag}: degree", "S_d degree", (q * q - 1) * q ** (d - 1), S.degree)
            rep.check(f"{tag}: <chi, chi>", "irreducibility of S_d", 1, inner_product(S, S, level=d + 1, jobs=cfg.jobs))
            rep.check(f"{tag}: depth", "depth of S_d", d, observed_depth(S, d, cfg.jobs))
            if _level_ok(par, d + 1):
                K = quotient_enumerate(K_spec(), d + 1, par)
                for a in range(2, q):
                    Sa = nilpotent_S_d(theta, d, par, a=a)
                    rep.check(f"{tag}: a={a} gives the same character", "independence of the unit a",
                              True, equal_pointwise(S, Sa, K, d + 1, cfg.jobs))
    # Mackey counts against direct pairings where K mod K_2 is small
    if _level_ok(par, 2):
        comps = [(s, depth_zero_component(s, 1)) for s in sigmas]
        for (s1, f1), (s2, f2) in [(a, b) for i, a in enumerate(comps) for b in comps[i:]]:
            H1, H2 = f1.inducing.domain, f2.inducing.domain
            reps = double_coset_reps(H1, H2, K_spec(), par, max(H1.depth_level(), H2.depth_level()))
            mk = mackey_pairing(f1.inducing, f2.inducing, reps, 2, cfg.jobs)
            direct = inner_product(f1, f2, level=2, jobs=cfg.jobs)
            rep.check(f"sigma{s1.alpha.k}{s1.beta.k} vs sigma{s2.alpha.k}{s2.beta.k} d=1: Mackey = direct",
                      "Mackey formula for intertwining numbers", direct, mk)
    _merge(doc, "depth-zero", rep)


# ---------------------------------------------------------------------------
# positive depth

def generic_v(torus, r: Fraction, p: int) -> Fraction:
    """The simplest v with nu(Tr(Gamma H_alpha)) = -r."""
    k = Fraction(r) + Fraction(vp_frac(torus.c, p), 2)
    if k.denominator != 1:
        raise ConfigError(f"no generic v for {torus.label} at r = {r}")
    return Fraction(1, p ** int(k))


def pick_datum(torus, r: Fraction, params):
    """The first admissible phi whose central character has depth zero, else the first one."""
    v = generic_v(torus, r, params.p)
    first = make_generic(torus, r, v, params)
    for choice in range(len(first.admissible)):
        D = first if choice == 0 else make_generic(torus, r, v, params, choice=choice)
        try:
            depth_zero_theta(D.theta)
        except ValueError:
            continue
        return D
    return first


def _rho_for(cfg: RunConfig):
    par = make_params(cfg.p, cfg.precision)
    tor = standard_tori(cfg.p, par.epsilon)[cfg.torus]
    D = pick_datum(tor, Fraction(cfg.r), par)
    return build_rho(D)


def positive_depth_suite(cfg: RunConfig, doc: ReportDocument) -> None:
    rho = _rho_for(cfg)
    D = rho.datum
    q = cfg.p
    rep = BranchingReport(cfg.echo())
    tag = f"{D.torus.label} r={D.r}"
    heis = rho.kind == "heisenberg"
    rep.check(f"{tag}: rho kind", "construction of rho", "heisenberg" if (not D.torus.ramified and D.r.numerator % 2 == 0)
              else "one-dimensional", rho.kind)
    rep.check(f"{tag}: rho degree", "construction of rho", q if heis else 1, rho.degree)
    for k, v in sorted(rho.checks.items()):
        rep.check(f"{tag}: rho identity: {k}", "isotypic properties of rho", True, v)
    if heis:
        L = rho.character.level
        K1 = quotient_enumerate(groups.principal_congruence(1), L, rho.character.params)
        for c in (0, 1):
            kap = induce(polarization_character(rho, c), groups.principal_congruence(1))
            rep.check(f"{tag}: polarization extension {c} induces chi_rho on K_1", "Heisenberg realization",
                      True, equal_pointwise(kap, rho.character, K1, L, cfg.jobs))
        mults = torus_multiplicities(rho)
        rep.check(f"{tag}: multiplicities of torus characters lie in {{0, 1}}", "Heisenberg realization", True,
                  all(m in (0, 1) for m in mults))
        rep.check(f"{tag}: multiplicities sum to q", "Heisenberg realization", q, sum(m for m in mults if m))
    for comp in positive_components(rho, cfg.d_max):
        if heis and comp.t != 0:
            log.info("component %s of depth %d is beyond the Heisenberg budget; not checked", comp.label, comp.d)
            continue
        verify_positive_iso(comp, rep, cfg.jobs)
    _merge(doc, "positive-depth", rep)


def k2r_suite(cfg: RunConfig, doc: ReportDocument) -> None:
    rho = _rho_for(cfg)
    D = rho.datum
    rep = BranchingReport(cfg.echo())
    r = D.r
    d_max = max(cfg.d_max, int(2 * r) + 1)
    out = verify_K2r_identity(rho, d_max, rep, cfg.jobs)
    rep.check(f"{D.torus.label} r={r}: total balances with closed-form tau dims", "restriction to K_{2r+}",
              out["n_direct"], out["n_from_closed_tau"])
    par = rho.character.params
    theta = depth_zero_theta(D.theta)
    sig = next((s for s in all_cuspidal(par.at(1)) if theta_of(s, par) == theta), None)
    for d in sorted({c.d for c in positive_components(rho, d_max) if c.d > 2 * r}):
        if rho.kind == "heisenberg" or d + 1 > par.N:
            log.info("key identification at depth %d skipped (%s, N=%d)", d, rho.kind, par.N)
            continue
        verify_key_identification(rho, d, rep, cfg.jobs, sigma=sig)
    _merge(doc, "k2r", rep)


SUITES = {
    "ring": ring_suite,
    "group": group_suite,
    "depth-zero": depth_zero_suite,
    "positive-depth": positive_depth_suite,
    "k2r": k2r_suite,
}


def run(cfg: RunConfig) -> ReportDocument:
    cfg = validate(cfg)
    if cfg.cache_dir:
        groups.set_cache_dir(cfg.cache_dir)
    doc = ReportDocument(cfg.echo())
    names = SUITE_NAMES if cfg.suite == "all" else (cfg.suite,)
    groups.set_cap(cfg.cap)
    try:
        for name in names:
            t0 = time.perf_counter()
            SUITES[name](cfg, doc)
            doc.timing[name] = time.perf_counter() - t0
    finally:
        groups.set_cap(None)
    return doc
