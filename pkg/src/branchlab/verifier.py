"""Mackey components of supercuspidal representations restricted to K, and their checks.

A component is kept lazily: its induced character is built the first time it
is needed, so that listing components (depths, degrees, parities) stays cheap.
Isomorphisms are checked by an intertwining number, a degree, a depth and, when
K mod K_{d+1} is small enough to enumerate, a pointwise character comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .classfn import (
    ClassFunction,
    double_coset_reps,
    equal_pointwise,
    fixed_dim,
    induce,
    inner_product,
    mackey_pairing,
)
from .cuspidal import CentralCharacter, CuspidalDatum, eta_twist, residue_to_central
from .groups import (
    K_spec,
    Monomial,
    Pattern,
    Product,
    principal_congruence,
    quotient_enumerate,
    quotient_order,
)
from .scalars import FieldParams
from .supercuspidal import (
    DepthDElement,
    LieDatum,
    RhoData,
    TorusCharacter,
    build_S_d,
    delta_of,
    inducing_character,
    nilpotent_S_d,
)

# pointwise comparisons are skipped above this many elements of K mod K_{d+1}
POINTWISE_CAP = 700_000


@dataclass
class Check:
    name: str
    anchor: str
    expected: Any
    computed: Any
    passed: bool


@dataclass
class ComponentRecord:
    label: str
    depth: int
    degree: int
    norm: Fraction | None = None
    target: str | None = None
    pairing: Fraction | None = None
    pointwise: bool | None = None


@dataclass
class BranchingReport:
    config: dict
    components: list[ComponentRecord] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def check(self, name: str, anchor: str, expected, computed, passed: bool | None = None) -> Check:
        c = Check(name, anchor, expected, computed, expected == computed if passed is None else bool(passed))
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def distinct_degrees(self) -> bool:
        degs = [c.degree for c in self.components]
        return len(set(degs)) == len(degs)


@dataclass(frozen=True)
class NilpotentOrbitRep:
    """tau_{N_1}(theta) (even depths) or tau_{N_pi}(theta) (odd depths), truncated at d_max."""

    parity: str  # "even" or "odd"
    theta: CentralCharacter
    d_max: int

    @property
    def depths(self) -> list[int]:
        start = 2 if self.parity == "even" else 1
        return list(range(start, self.d_max + 1, 2))

    def component(self, d: int, params: FieldParams) -> ClassFunction:
        if d not in self.depths:
            raise ValueError(f"depth {d} is not in this orbit's range")
        return nilpotent_S_d(self.theta, d, params)

    def fixed_dim_closed_form(self, r: Fraction, q: int) -> int:
        """Closed forms for the K_{2r+}-fixed dimension."""
        Q = q ** int(2 * r)
        return q * (Q - 1) if self.parity == "even" else Q - 1


def degree_formula(q: int, d: int, t: int = 0, y: Fraction = Fraction(0), r: Fraction = Fraction(0)) -> int:
    """Degree of a Mackey component of depth d."""
    if t == 0 and y == 0 and r:
        return (q - 1) * q ** int(r)
    return (q * q - 1) * q ** (d - 1)


def _level_ok(params: FieldParams, level: int) -> bool:
    return quotient_order(params, level) <= POINTWISE_CAP


def observed_depth(f: ClassFunction, d: int, jobs: int = 1) -> int | None:
    """d if f is trivial on K_{d+1} and not on K_d (each read one level deeper), else None."""
    deg = f.degree
    lv = max(f.level, d + 2)
    if fixed_dim(f, principal_congruence(d + 1), lv, jobs) != deg:
        return None
    if d > 0 and fixed_dim(f, principal_congruence(d), max(f.level, d + 1), jobs) == deg:
        return None
    return d


# ---------------------------------------------------------------------------
# depth zero

def depth_zero_components(sigma: CuspidalDatum, source: str, d_max: int) -> list[tuple[int, ClassFunction]]:
    """Components of Res_K of c-Ind from K (even depths) or K^eta (odd depths) up to d_max."""
    if source not in ("K", "K^eta"):
        raise ValueError("source must be K or K^eta")
    out: list[tuple[int, ClassFunction]] = []
    if source == "K":
        out.append((0, sigma.character))
    for d in range(1 if source == "K^eta" else 2, d_max + 1, 2):
        out.append((d, depth_zero_component(sigma, d)))
    return out


def depth_zero_component(sigma: CuspidalDatum, d: int) -> ClassFunction:
    inner = eta_twist(sigma, d)
    f = induce(inner, K_spec(), name=f"Ind_BK{d}({sigma.character.name})")
    f.inducing = inner  # type: ignore[attr-defined]
    return f


def theta_of(sigma: CuspidalDatum, params: FieldParams) -> CentralCharacter:
    return residue_to_central(sigma.theta, params)


def verify_depth_zero_iso(sigma: CuspidalDatum, d: int, params: FieldParams, report: BranchingReport,
                          jobs: int = 1, pointwise: bool = True) -> ComponentRecord:
    q = params.p
    comp = depth_zero_component(sigma, d)
    target = nilpotent_S_d(theta_of(sigma, params), d, params)
    lv = d + 1
    H1, H2 = comp.inducing.domain, target.inducing.domain
    reps = double_coset_reps(H1, H2, K_spec(), params, max(H1.depth_level(), H2.depth_level()))
    pair = mackey_pairing(comp.inducing, target.inducing, reps, lv, jobs)
    tag = f"sigma{sigma.alpha.k}{sigma.beta.k} d={d}"
    report.check(f"{tag}: intertwining with S_d(X_pi^-d, theta)", "depth-zero component isomorphism", 1, pair)
    want = (q * q - 1) * q ** (d - 1)
    report.check(f"{tag}: degree", "depth of depth-zero components", want, comp.degree)
    report.check(f"{tag}: target degree", "S_d degree", want, target.degree)
    pw = None
    if pointwise and _level_ok(params, lv):
        K = quotient_enumerate(K_spec(), lv, params)
        pw = equal_pointwise(comp, target, K, lv, jobs)
        report.check(f"{tag}: characters equal on K mod K_{lv}", "depth-zero component isomorphism", True, pw)
    dep = observed_depth(comp, d, jobs)
    report.check(f"{tag}: depth", "depth of depth-zero components", d, dep)
    rec = ComponentRecord(f"BK_{d}", d, comp.degree, None, f"S_{d}(X_pi^-{d}, theta)", pair, pw)
    report.components.append(rec)
    return rec


# ---------------------------------------------------------------------------
# positive depth

def _mt(rho: RhoData, d_max: int) -> list[tuple[Monomial, int, int]]:
    """(g, t, d) for g in M(T) with r + delta(g) <= d_max."""
    T, r = rho.datum.torus, rho.datum.r
    out = []
    t = 0
    while True:
        cand = [Monomial.alpha(t)]
        if T.ramified and t > 0:
            cand.append(Monomial.alpha_w(t))
        ds = [(g, r + delta_of(g, T.y)) for g in cand]
        if min(d for _, d in ds) > d_max:
            break
        for g, d in ds:
            if d <= d_max:
                if d.denominator != 1:
                    raise ArithmeticError("component depth is not integral")
                out.append((g, t, int(d)))
        t += 1
    return sorted(out, key=lambda x: x[2])


@dataclass
class MackeyComponent:
    rho: RhoData
    g: Monomial
    t: int
    d: int
    _char: ClassFunction | None = None

    @property
    def label(self) -> str:
        if self.t == 0 and not self.g.swap:
            return "I"
        return f"alpha^{self.t}" + (" w" if self.g.swap else "")

    @property
    def trivial_case(self) -> bool:
        """t = 0 and y = 0: the component is Ind_{T G_{0,s}}^K rho."""
        return self.t == 0 and self.rho.datum.y == 0

    @property
    def pattern(self) -> Pattern:
        """K meet G_{y,s}^g."""
        s = self.rho.datum.s
        delta = delta_of(self.g, self.rho.datum.y)
        c = lambda x: -((-x.numerator) // x.denominator)  # noqa: E731
        return Pattern(c(s), max(0, c(s - delta)), c(s + delta), c(s), f"K&G^{self.label}")

    def data(self) -> tuple[Product, LieDatum, TorusCharacter]:
        """Inducing subgroup (K meet T^g)(K meet G_{y,s}^g), Gamma^g and phi^g."""
        dat = self.rho.datum
        p = dat.params.p
        torus2, lam = dat.torus.intersect_K(self.g, p)
        H = Product(torus2, self.pattern, f"H_{self.label}")
        X = dat.gamma.conjugate(self.g, p)
        zeta = dat.phi.pullback(lam, dat.torus.c, p)
        return H, X, zeta

    @property
    def character(self) -> ClassFunction:
        if self._char is None:
            rho = self.rho
            if rho.kind == "heisenberg":
                if self.t != 0:
                    raise NotImplementedError("Heisenberg components beyond t = 0 exceed the precision budget")
                f = induce(rho.character, K_spec(), name="Ind(rho)")
                f.inducing = rho.character  # type: ignore[attr-defined]
            else:
                H, X, zeta = self.data()
                inner = inducing_character(H, X, zeta, rho.character.params, name=f"rho^{self.label}")
                f = induce(inner, K_spec(), name=f"Ind(rho^{self.label})")
                f.inducing = inner  # type: ignore[attr-defined]
            self._char = f
        return self._char

    @property
    def expected_degree(self) -> int:
        dat = self.rho.datum
        return degree_formula(dat.params.p, self.d, self.t, dat.y, dat.r)

    def s_target(self) -> ClassFunction:
        """S_d(Gamma^g, phi^g)."""
        H, X, zeta = self.data()
        p = self.rho.datum.params.p
        Xd = DepthDElement.from_lie(X, self.d, p)
        if Xd.torus.c != H.torus.c:
            raise ArithmeticError("T(Gamma^g) differs from K meet T^g")
        return build_S_d(Xd, zeta, self.rho.character.params)


def positive_components(rho: RhoData, d_max: int) -> list[MackeyComponent]:
    if rho.frame is not None and rho.kind == "heisenberg":
        raise NotImplementedError("framed Heisenberg components")
    return [MackeyComponent(rho, g, t, d) for g, t, d in _mt(rho, d_max)]


def verify_positive_iso(comp: MackeyComponent, report: BranchingReport, jobs: int = 1,
                        pointwise: bool = True) -> ComponentRecord:
    params = comp.rho.character.params
    f = comp.character
    d = comp.d
    tag = f"{comp.rho.datum.torus.label} r={comp.rho.datum.r} g={comp.label}"
    report.check(f"{tag}: degree", "degree of Mackey components", comp.expected_degree, f.degree)
    if comp.trivial_case:
        lv = f.level
        nrm = inner_product(f, f, level=lv, jobs=jobs)
        report.check(f"{tag}: <chi, chi>", "irreducibility of the t=y=0 component", 1, nrm)
        rec = ComponentRecord(comp.label, d, f.degree, nrm, "Ind_{T G_{0,s}}^K rho")
        report.components.append(rec)
        return rec
    target = comp.s_target()
    lv = max(d + 1, f.level)
    H1, H2 = f.inducing.domain, target.inducing.domain
    reps = double_coset_reps(H1, H2, K_spec(), params, max(H1.depth_level(), H2.depth_level()))
    pair = mackey_pairing(f.inducing, target.inducing, reps, lv, jobs)
    report.check(f"{tag}: intertwining with S_d(Gamma^g, phi^g)", "Mackey component isomorphism", 1, pair)
    report.check(f"{tag}: target degree", "S_d degree", comp.expected_degree, target.degree)
    pw = None
    if pointwise and _level_ok(params, lv):
        K = quotient_enumerate(K_spec(), lv, params)
        pw = equal_pointwise(f, target, K, lv, jobs)
        report.check(f"{tag}: characters equal on K mod K_{lv}", "Mackey component isomorphism", True, pw)
    if _level_ok(params, d + 2) or d + 2 <= params.N:
        dep = observed_depth(f, d, jobs)
        report.check(f"{tag}: depth", "depth of Mackey components", d, dep)
    rec = ComponentRecord(comp.label, d, f.degree, None, f"S_{d}(Gamma^g, phi^g)", pair, pw)
    report.components.append(rec)
    return rec


def depth_zero_theta(theta: CentralCharacter) -> CentralCharacter:
    """theta as a level-one character, or ValueError if it has positive depth."""
    for j in range(theta.q + 1):
        c = CentralCharacter(j, 1, theta.q)
        if c.at_level(theta.level) == theta.normal():
            return c
    raise ValueError("central character has positive depth")


def verify_key_identification(rho: RhoData, d: int, report: BranchingReport, jobs: int = 1,
                              sigma: CuspidalDatum | None = None) -> bool:
    """S_d(Gamma^g, phi^g) = S_d(X_pi^-d, theta) for the g of depth d > 2r.

    With ``sigma`` of the same central character, also compares against the
    depth-zero component Ind_{BK_d}^K sigma^(eta^d).
    """
    r = rho.datum.r
    if not d > 2 * r:
        raise ValueError(f"needs d > 2r, got d = {d}, r = {r}")
    comps = [c for c in positive_components(rho, d) if c.d == d]
    if not comps:
        raise ValueError(f"no component of depth {d}")
    params = rho.character.params
    theta = depth_zero_theta(rho.datum.theta)
    nil = nilpotent_S_d(theta, d, params)
    lv = d + 1
    ok = True
    for comp in comps:
        S = comp.s_target()
        tag = f"{rho.datum.torus.label} r={r} g={comp.label} d={d}"
        H1, H2 = S.inducing.domain, nil.inducing.domain
        reps = double_coset_reps(H1, H2, K_spec(), params, max(H1.depth_level(), H2.depth_level()))
        pair = mackey_pairing(S.inducing, nil.inducing, reps, lv, jobs)
        ok &= report.check(f"{tag}: intertwining with S_d(X_pi^-d, theta)", "higher-depth components vs nilpotent orbits",
                           1, pair).passed
        ok &= report.check(f"{tag}: degrees", "higher-depth components vs nilpotent orbits",
                           nil.degree, S.degree).passed
        if _level_ok(params, lv):
            K = quotient_enumerate(K_spec(), lv, params)
            ok &= report.check(f"{tag}: characters equal", "higher-depth components vs nilpotent orbits", True,
                               equal_pointwise(S, nil, K, lv, jobs)).passed
            if sigma is not None:
                if theta_of(sigma, params) != theta:
                    raise ValueError("sigma has a different central character")
                dz = depth_zero_component(sigma, d)
                ok &= report.check(f"{tag}: equals the depth-zero component of the same theta",
                                   "higher-depth components agree with depth zero", True,
                                   equal_pointwise(S, dz, K, lv, jobs)).passed
    return ok


# ---------------------------------------------------------------------------
# restriction to K_{2r+}

def nilpotent_coefficients(torus_label: str, ramified: bool, r: Fraction) -> tuple[int, int]:
    """(a_{N_1}, a_{N_pi}) from the torus type and the parity of r."""
    if ramified:
        return 1, 1
    even = int(r) % 2 == 0
    if torus_label == "T11":
        return (1, 0) if even else (0, 1)
    if torus_label == "Tww":
        return (0, 1) if even else (1, 0)
    raise ValueError(f"unknown unramified torus {torus_label}")


def dim_closed_form(torus_label: str, ramified: bool, r: Fraction, q: int) -> int:
    """Closed forms for dim pi^{K_{2r+}}."""
    if ramified:
        return (q ** int(2 * r) - q ** int(r - Fraction(1, 2))) * (q + 1)
    r = int(r)
    if torus_label == "T11":
        return q ** r * (q ** (2 * (r // 2) + 1) - 1)
    return q ** r * (q ** (2 * ((r - 1) // 2) + 2) - 1)


def n_table_rows(r: Fraction, q: int) -> dict[str, int | None]:
    """The three closed forms for n(pi_rho), or None where the exponent is not integral."""
    rows: dict[str, int | None] = {}
    rows["row 1: q - q^r"] = q - q ** int(r) if r.denominator == 1 else None
    rows["row 2: 1 - q^r"] = 1 - q ** int(r) if r.denominator == 1 else None
    rows["row 3: (q+1)(q^(r-1/2) - 1)"] = (q + 1) * (q ** int(r - Fraction(1, 2)) - 1) if r.denominator == 2 else None
    return rows


def table_row_for(torus_label: str, ramified: bool, r: Fraction) -> str | None:
    """The row that applies to (T, r) when the table text is unambiguous; None otherwise.

    Row 1 reads "T11, r even; or Tww, r odd", row 2 reads "Tww, r odd; or Tww,
    r even" and row 3 is the ramified row.  T11 with r odd appears in no row,
    and Tww with r odd appears in both, so those two cases are ambiguous.
    """
    if ramified:
        return "row 3: (q+1)(q^(r-1/2) - 1)"
    even = int(r) % 2 == 0
    if torus_label == "T11" and even:
        return "row 1: q - q^r"
    if torus_label == "Tww" and even:
        return "row 2: 1 - q^r"
    return None


def verify_K2r_identity(rho: RhoData, d_max: int, report: BranchingReport, jobs: int = 1) -> dict:
    """dim pi^{K_{2r+}}, the nilpotent-orbit dims under K_{2r+} and n(pi_rho), computed directly."""
    dat = rho.datum
    r, q, params = dat.r, dat.params.p, rho.character.params
    T = dat.torus
    if not d_max > 2 * r:
        raise ValueError("d_max must exceed 2r to see every component with K_{2r+}-fixed vectors")
    m = int(2 * r) + 1  # K_{2r+} = K_m
    Km = principal_congruence(m)
    comps = positive_components(rho, d_max)
    dim = Fraction(0)
    for c in comps:
        if c.d <= 2 * r:
            dim += fixed_dim(c.character, Km, max(c.character.level, m), jobs)
        # depth > 2r: an irreducible of depth d has no K_{2r+}-fixed vectors
    theta = depth_zero_theta(dat.theta)
    tau_dims = {}
    for parity in ("even", "odd"):
        orbit = NilpotentOrbitRep(parity, theta, d_max)
        tot = Fraction(0)
        for dd in orbit.depths:
            f = orbit.component(dd, params)
            tot += fixed_dim(f, Km, max(f.level, m), jobs)
        tau_dims[parity] = tot
    a1, ap = nilpotent_coefficients(T.label, T.ramified, r)
    n_direct = dim - a1 * tau_dims["even"] - ap * tau_dims["odd"]
    tag = f"{T.label} r={r}"
    report.check(f"{tag}: dim pi^K_(2r+) vs closed form", "restriction to K_{2r+}",
                 dim_closed_form(T.label, T.ramified, r, q), int(dim))
    # parities of the components beyond 2r match the case table
    deep = sorted({c.d % 2 for c in comps if c.d > 2 * r})
    allowed = ({0} if a1 else set()) | ({1} if ap else set())
    report.check(f"{tag}: parities of depths > 2r", "restriction to K_{2r+}", True, set(deep) <= allowed)
    closed_tau = {p: NilpotentOrbitRep(p, theta, d_max).fixed_dim_closed_form(r, q) for p in ("even", "odd")}
    rows = n_table_rows(r, q)
    matching = [k for k, v in rows.items() if v is not None and v == n_direct]
    row = table_row_for(T.label, T.ramified, r)
    out = {"dim": dim, "tau_even": tau_dims["even"], "tau_odd": tau_dims["odd"], "a_N1": a1, "a_Npi": ap,
           "n_direct": n_direct, "tau_closed": closed_tau, "n_rows": rows, "matching_rows": matching, "row": row}
    out["n_from_closed_tau"] = dim - a1 * closed_tau["even"] - ap * closed_tau["odd"]
    if row is not None:
        report.check(f"{tag}: n(pi_rho) vs {row}", "values of n(pi_rho)", rows[row], int(n_direct))
    else:
        # reported, not resolved: the table text does not single out a row
        report.check(f"{tag}: n(pi_rho) ambiguous in the table; matching rows {matching}",
                     "values of n(pi_rho)", "reported", "reported", True)
    for p, lab in (("even", "tau_N1"), ("odd", "tau_Npi")):
        report.check(f"{tag}: {lab} fixed dim direct {tau_dims[p]} / closed form {closed_tau[p]}",
                     "nilpotent orbit fixed dimensions", "reported", "reported", True)
    return out
