"""Exact arithmetic for Strichartz exponent pairs.

Exponents are stored by their reciprocals, so ``infinity`` is just a
reciprocal of zero and Holder duality is ``1/p' = 1 - 1/p``.  The module
builds the exponent pairs used in the local and global well-posedness
estimates, checks their admissibility, and evaluates every exponent
bookkeeping system as exact rational residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Callable, Mapping

from .params import ProblemParams, as_fraction, derive_indices

__all__ = [
    "ExtRational",
    "INF",
    "ExponentPair",
    "SmallParams",
    "SystemReport",
    "FAMILIES",
    "SYSTEMS",
    "admissible",
    "holder_dual",
    "lemma_pair",
    "lemma_pairs",
    "family_claims",
    "family_hypotheses",
    "system_hypotheses",
    "verify_relation_system",
    "dyadic_eps",
    "default_pairs",
    "B3_VARIANTS",
    "KINDS",
]

F = Fraction


@total_ordering
class ExtRational:
    """Positive rational or ``+inf``, stored as the exact reciprocal."""

    __slots__ = ("recip",)

    def __init__(self, value):
        if isinstance(value, ExtRational):
            recip = value.recip
        elif _is_inf(value):
            recip = F(0)
        else:
            v = as_fraction(value)
            if v == 0:
                raise ValueError("exponent 0 has no reciprocal")
            recip = 1 / v
        object.__setattr__(self, "recip", recip)

    def __setattr__(self, name, value):
        raise AttributeError("ExtRational is immutable")

    @classmethod
    def from_recip(cls, recip) -> "ExtRational":
        obj = cls.__new__(cls)
        object.__setattr__(obj, "recip", as_fraction(recip))
        return obj

    @property
    def is_inf(self) -> bool:
        return self.recip == 0

    @property
    def value(self):
        """The exponent as a Fraction, or ``math.inf``."""
        return math.inf if self.is_inf else 1 / self.recip

    def to_float(self) -> float:
        return float(self.value)

    def __eq__(self, other):
        if not isinstance(other, ExtRational):
            try:
                other = ExtRational(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.recip == other.recip

    def __lt__(self, other):
        other = other if isinstance(other, ExtRational) else ExtRational(other)
        if self.is_inf:
            return False
        if other.is_inf:
            return True
        return self.value < other.value

    def __hash__(self):
        return hash(("ExtRational", self.recip))

    def __str__(self):
        return "inf" if self.is_inf else str(self.value)

    def __repr__(self):
        return f"ExtRational({str(self)!r})"


def _is_inf(x) -> bool:
    if isinstance(x, str):
        return x.strip().lower() in ("inf", "infinity", "oo", "∞")
    return isinstance(x, float) and math.isinf(x) and x > 0


INF = ExtRational("inf")


@dataclass(frozen=True)
class ExponentPair:
    """Time exponent ``q`` and space exponent ``p``.

    Positive values are accepted; :attr:`valid` says whether both are at
    least 1, which is what a Lebesgue exponent needs.  Pairs that are not
    valid are never admissible.
    """

    q: ExtRational
    p: ExtRational

    def __post_init__(self):
        q, p = ExtRational(self.q), ExtRational(self.p)
        for name, e in (("q", q), ("p", p)):
            if e.recip < 0:
                raise ValueError(f"malformed pair: {name} = {e} is negative")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def valid(self) -> bool:
        return self.q.recip <= 1 and self.p.recip <= 1

    def __str__(self):
        return f"({self.q}, {self.p})"

    def as_dict(self) -> dict:
        return {"q": str(self.q), "p": str(self.p)}


@dataclass(frozen=True)
class SmallParams:
    """The small parameters of the constructions."""

    eps: Fraction = F(1, 1000)
    theta: Fraction = F(1, 1000)

    def __post_init__(self):
        object.__setattr__(self, "eps", as_fraction(self.eps))
        object.__setattr__(self, "theta", as_fraction(self.theta))
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")

    def check_theta(self, params: ProblemParams):
        if not self.theta < 2 * params.sigma:
            raise ValueError(f"theta = {self.theta} must lie in (0, 2 sigma) = (0, {2 * params.sigma})")


def holder_dual(p) -> ExtRational:
    """Holder conjugate; 1 and infinity are swapped.

    Raises
    ------
    ValueError
        If ``p < 1``.
    """
    e = ExtRational(p)
    if e.recip > 1 or e.recip < 0:
        raise ValueError(f"Holder dual needs p >= 1, got {e}")
    return ExtRational.from_recip(1 - e.recip)


# --- admissibility --------------------------------------------------------

KINDS = ("L2", "Hs", "HminusS")


def _p_range(N: int, s: Fraction, kind: str):
    """Bounds on 1/p as (lo, lo_strict, hi, hi_strict): lo <= 1/p <= hi."""
    if kind == "L2":
        if N >= 3:
            return F(N - 2, 2 * N), False, F(1, 2), False
        if N == 2:
            return F(0), True, F(1, 2), False
        return F(0), False, F(1, 2), False
    strict_low = kind == "HminusS"
    if N >= 3:
        # 2N/(N-2s) <= p < 2N/(N-2)
        return F(N - 2, 2 * N), True, (N - 2 * s) / (2 * N), strict_low
    if N == 2:
        # 2/(1-s) <= p < infinity; the upper decoration is read as "finite"
        return F(0), True, (1 - s) / 2, strict_low
    return F(0), False, (1 - 2 * s) / 2, strict_low


def admissible(pair: ExponentPair, N: int, s=0, kind: str = "L2") -> bool:
    """Exact admissibility test.

    ``kind="L2"`` uses ``2/q = N/2 - N/p`` (``s`` ignored), ``"Hs"`` uses
    ``2/q = N/2 - N/p - s`` and ``"HminusS"`` uses ``... + s``; in each case
    ``p`` must lie in the dimension-dependent range, with decorated
    endpoints treated as strict inequalities.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown admissibility kind {kind!r}")
    if not isinstance(pair, ExponentPair):
        raise TypeError("admissible() needs an ExponentPair")
    if N < 1:
        raise ValueError("N must be positive")
    s = F(0) if kind == "L2" else as_fraction(s)
    if not pair.valid:
        return False
    shift = {"L2": 0, "Hs": -s, "HminusS": s}[kind]
    if 2 * pair.q.recip != F(N, 2) - N * pair.p.recip + shift:
        return False
    lo, lo_strict, hi, hi_strict = _p_range(N, s, kind)
    if hi < 0 or hi < lo:
        return False
    r = pair.p.recip
    ok_lo = r > lo if lo_strict else r >= lo
    ok_hi = r < hi if hi_strict else r <= hi
    return ok_lo and ok_hi


# --- exponent constructions -----------------------------------------------

def _pair(q, p) -> ExponentPair:
    return ExponentPair(ExtRational(q), ExtRational(p))


def _intercritical(p: ProblemParams) -> bool:
    lo = (2 - p.b) / p.N
    return p.sigma > lo and (p.N < 3 or p.sigma < (2 - p.b) / (p.N - 2))


def _h_lwp(p: ProblemParams, s: SmallParams):
    return [
        ("N >= 3", p.N >= 3),
        ("0 < b < min{N/2, 2}", 0 < p.b < min(F(p.N, 2), F(2))),
        ("(2-b)/N < sigma < (2-b)/(N-2)", p.N >= 3 and _intercritical(p)),
    ]


def _h_lg1(p: ProblemParams, s: SmallParams):
    return [
        ("N = 2", p.N == 2),
        ("0 < b < 1", 0 < p.b < 1),
        ("sigma > (2-b)/2", p.sigma > (2 - p.b) / 2),
        ("0 < theta < 2 sigma", 0 < s.theta < 2 * p.sigma),
    ]


def _h_b3(p: ProblemParams, s: SmallParams):
    return [
        ("N = 3", p.N == 3),
        ("1 <= b < 3/2", 1 <= p.b < F(3, 2)),
        ("(2-b)/3 < sigma < 2-b", p.N == 3 and _intercritical(p)),
    ]


def _h_contraction(p: ProblemParams, s: SmallParams):
    return [
        ("N >= 3", p.N >= 3),
        ("0 < b < 2", 0 < p.b < 2),
        ("(2-b)/N < sigma < (2-b)/(N-2)", p.N >= 3 and _intercritical(p)),
        ("0 < theta < 2 sigma", 0 < s.theta < 2 * p.sigma),
    ]


def _pa1(p, sm, variant):
    N, sg = p.N, p.sigma
    return {"pair": _pair(2 * (2 * sg + 2) / (sg * (N - 2)), N * (2 * sg + 2) / (N + 2 * sg))}


def _pa2(p, sm, variant):
    N, b = p.N, p.b
    return {"pair": _pair(2 * (N - b) / (N - 2), 2 * N * (N - b) / (N * (N - 2) + 4 - b * N))}


def _ppm(sign):
    def build(p, sm, variant):
        N, sg, b, e = p.N, p.sigma, p.b, sm.eps
        pp = 2 * sg * (2 * sg + 1) * N / (2 * sg**2 * N + 2 - b + sign * e)
        qq = 4 * sg * (2 * sg + 1) / (sg * N - 2 + b - sign * e)
        return {"pair": _pair(qq, pp)}
    return build


def _lgwp_common(p, sm):
    sg, b, t = p.sigma, p.b, sm.theta
    r_hat = 4 * sg * (2 * sg + 2 - t) / ((2 * sg - t) * (2 - b))
    return sg, b, t, r_hat


def _lgwp_hat(p, sm, variant):
    sg, b, t, r_hat = _lgwp_common(p, sm)
    q_hat = 4 * sg * (2 * sg + 2 - t) / (2 * sg * (2 * sg + b) - t * (2 * sg - 2 + b))
    a_hat = 2 * sg * (2 * sg + 2 - t) / (2 - b)
    return {"hat": _pair(q_hat, r_hat), "hat_s": _pair(a_hat, r_hat)}


def _lgwp_tilde(p, sm, variant):
    sg, b, t, r_hat = _lgwp_common(p, sm)
    a_tilde = 2 * sg * (2 * sg + 2 - t) / (2 * sg * (2 * sg + b - t) - (2 - b) * (1 - t))
    return {"tilde": _pair(a_tilde, r_hat)}


def _lgwp_bar(p, sm, variant):
    sg, b, t = p.sigma, p.b, sm.theta
    sc = derive_indices(p).s_c
    a_bar = 2 * (2 * sg + 1 - t) / (1 - sc + t)
    r_bar = 4 * sg * (2 * sg + 1 - t) / (2 * sg * (1 - b + sc) + 2 - b - t * (2 - b + 2 * sg))
    q_bar = 2 * (2 * sg + 1 - t) / (1 + 2 * sg * sc + t * (1 - sc))
    return {"bar": _pair(q_bar, r_bar), "bar_s": _pair(a_bar, r_bar)}


def _lgwp_star(p, sm, variant):
    sg, b, t = p.sigma, p.b, sm.theta
    a_star = 2 * (2 * sg - t) / (1 + t)
    r_star = 4 * sg * (2 * sg - t) / (2 * sg * (1 - b) - t * (2 - b + 2 * sg))
    return {"star": _pair(a_star, r_star), "qr": _pair(2 / (1 - t), 2 / t)}


B3_VARIANTS = ("printed", "reciprocal", "scaling")


def _b3_eps(p, sm, variant):
    sg, b, e = p.sigma, p.b, sm.eps
    p_bar = 3 / (1 + e)
    if variant == "printed":
        q_bar = (1 - 2 * e) / 2
    elif variant == "reciprocal":
        q_bar = 2 / (1 - 2 * e)
    elif variant == "scaling":
        # q_bar solved from 2/q = 3/2 - 3/p_bar
        q_bar = 2 / (F(3, 2) - 3 / p_bar)
    else:
        raise ValueError(f"unknown B3-eps variant {variant!r}; choose from {B3_VARIANTS}")
    q = 4 / (2 * b - 1 + 4 * e * (2 * sg + 1))
    pp = 3 / (2 - b - 2 * e * (2 * sg + 1))
    return {"bar": _pair(q_bar, p_bar), "pair": _pair(q, pp)}


def _adm_ball(p, sm, variant):
    N, sg, e, t = p.N, p.sigma, sm.eps, sm.theta
    ix = derive_indices(p)
    sc, sgc = ix.s_c, ix.sigma_c
    a = (2 * sg + 2 - t) / (1 - sc - e)
    r = N * sgc * (2 * sg + 2 - t) / (N * (2 * sg + 2 - t) - 2 * sgc * (1 - sc - e))
    return {"ball": _pair(a, r)}


def _adm_exterior(p, sm, variant):
    return {"exterior": ExponentPair(INF, ExtRational(derive_indices(p).sigma_c))}


@dataclass(frozen=True)
class _Family:
    build: Callable
    hypotheses: Callable
    claims: tuple  # (role, kind, s-level) with s-level in {"0", "sc"}


FAMILIES: dict[str, _Family] = {
    "PA1": _Family(_pa1, _h_lwp, (("pair", "L2"),)),
    "PA2": _Family(_pa2, _h_lwp, (("pair", "L2"),)),
    "PPM-plus": _Family(_ppm(+1), _h_lwp, (("pair", "L2"),)),
    "PPM-minus": _Family(_ppm(-1), _h_lwp, (("pair", "L2"),)),
    "LGWP-hat": _Family(_lgwp_hat, _h_lg1, (("hat", "L2"), ("hat_s", "Hs"))),
    "LGWP-tilde": _Family(_lgwp_tilde, _h_lg1, (("tilde", "HminusS"),)),
    "LGWP-bar": _Family(_lgwp_bar, _h_lg1, (("bar", "L2"), ("bar_s", "Hs"))),
    "LGWP-star": _Family(_lgwp_star, _h_lg1, (("star", "Hs"), ("qr", "L2"))),
    "B3-eps": _Family(_b3_eps, _h_b3, (("bar", "L2"), ("pair", "L2"))),
    "ADM-ball": _Family(_adm_ball, _h_contraction, (("ball", "Hs"),)),
    "ADM-exterior": _Family(_adm_exterior, _h_contraction, (("exterior", "Hs"),)),
}


def _family(name: str) -> _Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown pair family {name!r}; choose from {sorted(FAMILIES)}") from None


def family_hypotheses(family: str, params: ProblemParams, smalls: SmallParams | None = None):
    """Hypotheses of the source lemma as ``[(text, bool)]``."""
    return _family(family).hypotheses(params, smalls or SmallParams())


def lemma_pairs(family: str, params: ProblemParams, smalls: SmallParams | None = None,
                variant: str = "printed") -> dict[str, ExponentPair]:
    """Pairs of a construction keyed by role.

    Raises
    ------
    ValueError
        If the parameters violate a hypothesis of the source lemma (the
        message names it), or the family is unknown.
    """
    fam = _family(family)
    smalls = smalls or SmallParams()
    failed = [text for text, ok in fam.hypotheses(params, smalls) if not ok]
    if failed:
        raise ValueError(f"{family} needs {', '.join(failed)}; got N={params.N}, "
                         f"sigma={params.sigma}, b={params.b}")
    try:
        return fam.build(params, smalls, variant)
    except ZeroDivisionError as exc:
        raise ValueError(f"{family}: a denominator vanishes for these parameters") from exc


def lemma_pair(family: str, params: ProblemParams, smalls: SmallParams | None = None,
               variant: str = "printed") -> tuple[ExponentPair, ...]:
    """The one or two pairs of a construction, in the order of ``FAMILIES``."""
    return tuple(lemma_pairs(family, params, smalls, variant).values())


def family_claims(family: str, params: ProblemParams, smalls: SmallParams | None = None,
                  variant: str = "printed") -> list[tuple[str, bool]]:
    """Check the admissibility kinds claimed for a construction."""
    pairs = lemma_pairs(family, params, smalls, variant)
    sc = derive_indices(params).s_c
    out = []
    for role, kind in _family(family).claims:
        pr = pairs[role]
        level = "" if kind == "L2" else " (s = s_c)"
        out.append((f"{role} {pr} is {kind}-admissible{level}", admissible(pr, params.N, sc, kind)))
    if family in ("PPM-plus", "PPM-minus"):
        out.append(("p < N", pairs["pair"].p < params.N))
    return out


# --- relation systems -----------------------------------------------------

@dataclass
class SystemReport:
    """Residuals and side conditions of one exponent system.

    ``values`` holds reported quantities (for example ``N/gamma - b``);
    ``exponent_checks`` records whether derived Holder exponents are
    genuine exponents, plus dual pairs mentioned only in passing.  It is
    informational and does not affect :attr:`passed`.
    """

    system_id: str
    relations: list = field(default_factory=list)
    side_conditions: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    exponent_checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.relations) and all(ok for _, ok in self.side_conditions)

    @property
    def residuals_zero(self) -> bool:
        return all(ok for _, _, ok in self.relations)

    @property
    def failures(self) -> list[str]:
        out = [f"{text} (residual {res})" for text, res, ok in self.relations if not ok]
        return out + [text for text, ok in self.side_conditions if not ok]

    def relation(self, text: str, lhs, rhs):
        res = F(lhs) - F(rhs)
        self.relations.append((text, res, res == 0))

    def side(self, text: str, ok: bool):
        self.side_conditions.append((text, bool(ok)))

    def value(self, name: str, v):
        self.values[name] = F(v)

    def exponent(self, name: str, recip):
        self.exponent_checks.append((f"0 <= 1/{name} <= 1", 0 <= recip <= 1))

    def as_dict(self) -> dict:
        return {
            "system_id": self.system_id,
            "pass": self.passed,
            "relations": [{"relation": t, "residual": str(r), "pass": ok} for t, r, ok in self.relations],
            "side_conditions": [{"condition": t, "pass": ok} for t, ok in self.side_conditions],
            "values": {k: str(v) for k, v in self.values.items()},
            "exponent_checks": [{"check": t, "pass": ok} for t, ok in self.exponent_checks],
        }


def _claims_into(rep: SystemReport, family: str, params, smalls, pairs, roles):
    sc = derive_indices(params).s_c
    for role, kind in _family(family).claims:
        if role in roles:
            pr = pairs[role]
            rep.side(f"{role} {pr} is {kind}-admissible", admissible(pr, params.N, sc, kind))


def _sys_gwp3(p, sm, pairs, rep):
    sg, t = p.sigma, sm.theta
    q_hat, r_hat = pairs["hat"].q.recip, pairs["hat"].p.recip
    a_hat = pairs["hat_s"].q.recip
    a_tilde = pairs["tilde"].q.recip
    rep.relation("hat_s and tilde share the space exponent r_hat",
                 pairs["hat_s"].p.recip + pairs["tilde"].p.recip, 2 * r_hat)
    rep.relation("1/a_tilde' = (2sigma-theta)/a_hat + 1/a_hat", 1 - a_tilde, (2 * sg - t) * a_hat + a_hat)
    rep.relation("1/q_hat' = (2sigma-theta)/a_hat + 1/q_hat", 1 - q_hat, (2 * sg - t) * a_hat + q_hat)
    _lg1_regions(p, sm, rep, r_space=r_hat, coeff=2 * sg + 2 - t, d_coeff=None)


def _lg1_regions(p, sm, rep, r_space, coeff, d_coeff, r_star=None):
    """Unit-ball / exterior choices of r1 (and p1) in the 2-D estimates."""
    sg, b, t = p.sigma, p.b, sm.theta
    target = t * (2 - b) / (2 * sg)
    ball_tr1 = 8 * sg / (2 - b)
    ext_tr1 = (2 + 4 * sg / (2 - b)) / 2
    for region, tr1 in (("ball", ball_tr1), ("exterior", ext_tr1)):
        r1 = t / tr1  # reciprocal of r1
        if d_coeff is None:
            # 1/r_hat' = 1/gamma + 1/r1 + 1/r2 + 1/r_hat,  r_hat = (2sigma-theta) r2
            g = 1 - r_space - r1 - (2 * sg - t) * r_space - r_space
        else:
            # 1/r' = 1/gamma + 1/r1 + (2sigma-theta)/r_bar + 1/r_bar,  r = 2/theta
            g = 1 - t / 2 - r1 - coeff * r_space
        rep.relation(f"[{region}] 2/gamma - b = theta(2-b)/(2sigma) - 2/r1", 2 * g - b, target - 2 * r1)
        rep.value(f"{region}: 2/gamma - b", 2 * g - b)
        rep.exponent(f"gamma[{region}]", g)
        if region == "ball":
            rep.side("[ball] 2/gamma - b > 0", 2 * g - b > 0)
        else:
            rep.side("[exterior] 2/gamma - b < 0", 2 * g - b < 0)
        if d_coeff is not None:
            p1 = target / 4 if region == "ball" else target  # reciprocal of p1
            d = 1 - t / 2 - p1 - d_coeff * r_star
            rep.relation(f"[{region}] 2/d - b - 1 = theta(2-b)/(2sigma) - 2/p1", 2 * d - b - 1, target - 2 * p1)
            rep.value(f"{region}: 2/d - b - 1", 2 * d - b - 1)
            rep.exponent(f"d[{region}]", d)
            if region == "ball":
                rep.side("[ball] 2/d - b - 1 > 0", 2 * d - b - 1 > 0)
            else:
                rep.side("[exterior] 2/d - b - 1 < 0", 2 * d - b - 1 < 0)


def _sys_gwp4(p, sm, pairs, rep):
    sg, b, t = p.sigma, p.b, sm.theta
    sc = derive_indices(p).s_c
    q_bar, r_bar = pairs["bar"].q.recip, pairs["bar"].p.recip
    a_bar = pairs["bar_s"].q.recip
    a_star, r_star = pairs["star"].q.recip, pairs["star"].p.recip
    q = pairs["qr"].q.recip
    rep.relation("1/q' = (2sigma-theta)/a_bar + 1/q_bar", 1 - q, (2 * sg - t) * a_bar + q_bar)
    rep.relation("(2sigma-theta) q' = a*", (1 - q) / (2 * sg - t), a_star)
    rep.side("r_bar > 2/(1-s_c)", r_bar < (1 - sc) / 2)
    rep.side("r* > 2/(1-s_c)", 0 < r_star < (1 - sc) / 2)
    rep.side("denominator of r* positive", 2 * sg * (1 - b) - t * (2 - b + 2 * sg) > 0)
    _lg1_regions(p, sm, rep, r_space=r_bar, coeff=2 * sg + 1 - t, d_coeff=2 * sg - t, r_star=r_star)


def _holder_chain_grad(p, q, pp):
    """gamma, d, q1 from the gradient estimate with one L2 pair (q, p)."""
    N, sg = p.N, p.sigma
    alpha = 2 * sg * (pp - F(1, N))
    e = (2 * sg + 1) * (pp - F(1, N))
    beta = alpha + pp
    gamma = 1 - pp - beta
    d = 1 - pp - e
    q1 = 1 - q - (2 * sg + 1) * q
    return gamma, d, q1


def _sys_l1(which):
    def run(p, sm, pairs, rep):
        N, sg, b = p.N, p.sigma, p.b
        pr = pairs["pair"]
        q, pp = pr.q.recip, pr.p.recip
        gamma, d, q1 = _holder_chain_grad(p, q, pp)
        base = N - 2 * N * pp - 2 * sg * N * pp + 2 * sg
        rep.relation("N/gamma = N - 2N/p - 2sigma N/p + 2sigma", N * gamma, base)
        rep.relation("N/d = N - 2N/p - 2sigma N/p + 2sigma + 1", N * d, base + 1)
        if which == "L1C12":
            rep.relation("1/q1 = (4 - 2sigma(N-2))/4", q1, (4 - 2 * sg * (N - 2)) / F(4))
        else:
            rep.relation("1/q1 = (4 - 2b - 2sigma(N-2))/(2(N-b))", q1,
                         (4 - 2 * b - 2 * sg * (N - 2)) / (2 * (N - b)))
            if pp != F(1, N):
                rep.relation("((N-b)p - 2N)/(N-p) = (4-2b)/(N-2)",
                             ((N - b) / pp - 2 * N) / (N - 1 / pp), (4 - 2 * b) / F(N - 2))
        rep.value("N/gamma - b", N * gamma - b)
        rep.value("N/d - b - 1", N * d - b - 1)
        rep.value("1/q1", q1)
        rep.exponent("gamma", gamma)
        rep.exponent("d", d)
        rep.side(f"pair {pr} is L2-admissible", admissible(pr, N, 0, "L2"))
        rep.side("p < N", pp > F(1, N))
        rep.side("1/q1 > 0", q1 > 0)
        if which == "L1C12":
            rep.side("[exterior] N/gamma - b < 0", N * gamma - b < 0)
            rep.side("[exterior] N/d - b - 1 < 0", N * d - b - 1 < 0)
        else:
            rep.side("[ball] N/gamma - b > 0", N * gamma - b > 0)
            rep.side("[ball] N/d - b - 1 > 0", N * d - b - 1 > 0)
    return run


def _sys_sistema(which):
    def run(p, sm, pairs, rep):
        N, sg, b, e = p.N, p.sigma, p.b, sm.eps
        sc = derive_indices(p).s_c
        p_star = (4 * sg + 2 - b) / (2 * N * sg)  # reciprocal of p*
        rep.relation("N/p* = (N+2)/2 + 1 - s_c (Sobolev step)", N * p_star, F(N + 2, 2) + 1 - sc)
        for role in ("minus", "plus"):
            if role not in pairs:
                continue
            sign = 1 if role == "plus" else -1
            region = "exterior" if role == "plus" else "ball"
            pr = pairs[role]
            q, pp = pr.q.recip, pr.p.recip
            rhs = N * p_star + 2 * sg * sc - N * (2 * sg + 1) * pp - b
            q_star_closed = (-sg * (N - 2) + 2 - b + sign * e) / (4 * sg)
            beta = 2 * sg * (pp - sc / N)
            ee = beta
            f = pp - F(1, N)
            if which == "sistema":
                gamma = p_star - beta - pp
                d = p_star - ee - f
                q_star = F(1, 2) - (2 * sg + 1) * q
                rep.relation(f"[{region}] N/gamma - b = N/p* + 2sigma s_c - N(2sigma+1)/p - b", N * gamma - b, rhs)
                rep.relation(f"[{region}] N/d - b - 1 = N/p* + 2sigma s_c - N(2sigma+1)/p - b", N * d - b - 1, rhs)
                rep.relation(f"[{region}] 1/q* = (-sigma(N-2) + 2 - b {'+' if sign > 0 else '-'} eps)/(4sigma)",
                             q_star, q_star_closed)
            else:
                gamma = (rhs + b) / N
                d = (rhs + b + 1) / N
                q_star = q_star_closed
                rep.relation(f"[{region}] 1/p* = 1/gamma + 1/beta + 1/p", p_star, gamma + beta + pp)
                rep.relation(f"[{region}] 1/p* = 1/d + 1/e + 1/f", p_star, d + ee + f)
                rep.relation(f"[{region}] 1/2 = 1/q* + 2sigma/q + 1/q", F(1, 2), q_star + (2 * sg + 1) * q)
            rep.relation(f"[{region}] N/gamma - b = {'-' if sign > 0 else ''}eps/(2sigma)",
                         N * gamma - b, -sign * e / (2 * sg))
            rep.value(f"{region}: N/gamma - b", N * gamma - b)
            rep.value(f"{region}: 1/q*", q_star)
            rep.exponent(f"gamma[{region}]", gamma)
            rep.exponent(f"d[{region}]", d)
            rep.side(f"[{region}] pair {pr} is L2-admissible", admissible(pr, N, 0, "L2"))
            rep.side(f"[{region}] p < N", pp > F(1, N))
            rep.side(f"[{region}] 1/q* > 0", q_star > 0)
            if region == "ball":
                rep.side("[ball] N/gamma - b > 0", N * gamma - b > 0)
                rep.side("[ball] N/d - b - 1 > 0", N * d - b - 1 > 0)
            else:
                rep.side("[exterior] N/gamma - b < 0", N * gamma - b < 0)
                rep.side("[exterior] N/d - b - 1 < 0", N * d - b - 1 < 0)
    return run


def _sys_cond_h1sl2(p, sm, pairs, rep):
    sg, b, e = p.sigma, p.b, sm.eps
    q_bar, p_bar = pairs["bar"].q.recip, pairs["bar"].p.recip
    q, pp = pairs["pair"].q.recip, pairs["pair"].p.recip
    r1 = 2 * sg * (p_bar - F(1, 3))
    ee = (2 * sg + 1) * (p_bar - F(1, 3))
    gamma = 1 - pp - r1 - p_bar
    d = 1 - pp - ee
    q1 = 1 - q - (2 * sg + 1) * q_bar
    printed = 2 - b + 2 * sg - 3 * pp - e * (2 * sg + 1)
    rep.relation("3/gamma - b = 2 - b + 2sigma - 3/p - eps(2sigma+1)", 3 * gamma - b, printed)
    rep.relation("3/d - b - 1 = 2 - b + 2sigma - 3/p - eps(2sigma+1)", 3 * d - b - 1, printed)
    rep.relation("1/q1 = (4 - 2b - 2sigma - 2eps(2sigma+1))/4", q1, (4 - 2 * b - 2 * sg - 2 * e * (2 * sg + 1)) / 4)
    rep.value("3/gamma - b", 3 * gamma - b)
    rep.value("3/d - b - 1", 3 * d - b - 1)
    rep.value("1/q1", q1)
    rep.exponent("gamma", gamma)
    rep.exponent("d", d)
    rep.side("q_bar >= 1", q_bar <= 1)
    rep.side(f"(q_bar, p_bar) = {pairs['bar']} is L2-admissible", admissible(pairs["bar"], 3, 0, "L2"))
    rep.side(f"(q, p) = {pairs['pair']} is L2-admissible", admissible(pairs["pair"], 3, 0, "L2"))
    rep.side("p_bar < 3", p_bar > F(1, 3))
    rep.side("[ball] 3/gamma - b > 0", 3 * gamma - b > 0)
    rep.side("[ball] 3/d - b - 1 > 0", 3 * d - b - 1 > 0)
    rep.side("1/q1 > 0", q1 > 0)


def _sys_admrel(p, sm, pairs, rep):
    N, sg, b, e, t = p.N, p.sigma, p.b, sm.eps, sm.theta
    ix = derive_indices(p)
    sc, sgc = ix.s_c, ix.sigma_c
    r1 = t * (F(1, 2) - F(1, N))  # from 1 = N/2 - N/(theta r1)
    for region in ("ball", "exterior"):
        if region not in pairs:
            continue
        pr = pairs[region]
        a, r = pr.q.recip, pr.p.recip
        a_tilde = a + sc
        gamma = 1 - r - r1 - (2 * sg + 1 - t) * r
        q1 = 1 - a_tilde - (2 * sg + 1 - t) * a
        rep.relation(f"[{region}] N/gamma - b = N - b - N theta/2 + theta - N(2sigma+2-theta)/r",
                     N * gamma - b, N - b - N * t / 2 + t - N * (2 * sg + 2 - t) * r)
        rep.relation(f"[{region}] 1/q1 = 1 - s_c - (2sigma+2-theta)/a", q1, 1 - sc - (2 * sg + 2 - t) * a)
        if region == "ball":
            rep.relation("[ball] 1/q1 = eps", q1, e)
            rep.relation("[ball] N/gamma - b = theta(1-s_c) - 2 eps", N * gamma - b, t * (1 - sc) - 2 * e)
            rep.side("0 < eps < theta(1-s_c)/2", 0 < e < t * (1 - sc) / 2)
            rep.side("[ball] r > sigma_c", r < 1 / sgc)
            rep.side("[ball] N/gamma - b > 0", N * gamma - b > 0)
        else:
            rep.relation("[exterior] 1/q1 = 1 - s_c", q1, 1 - sc)
            rep.relation("[exterior] N/gamma - b = -(2-theta)(1-s_c)", N * gamma - b, -(2 - t) * (1 - sc))
            rep.side("[exterior] N/gamma - b < 0", N * gamma - b < 0)
        rep.side(f"[{region}] (a, r) = {pr} is Hs-admissible (s = s_c)", admissible(pr, N, sc, "Hs"))
        tilde = ExponentPair(ExtRational.from_recip(a_tilde), ExtRational.from_recip(r))
        # the dual pair sits on the open endpoint r = sigma_c in the exterior,
        # so it is reported but does not enter the verdict
        rep.exponent_checks.append((f"[{region}] (a_tilde, r) = {tilde} is HminusS-admissible (s = s_c)",
                                    admissible(tilde, N, sc, "HminusS")))
        rep.side(f"[{region}] 1/q1 > 0", q1 > 0)
        rep.value(f"{region}: N/gamma - b", N * gamma - b)
        rep.value(f"{region}: 1/q1", q1)
        rep.exponent(f"gamma[{region}]", gamma)


@dataclass(frozen=True)
class _System:
    run: Callable
    defaults: tuple  # (family, {family role: system role})
    hypotheses: Callable


SYSTEMS: dict[str, _System] = {
    "GWP3": _System(_sys_gwp3, (("LGWP-hat", {"hat": "hat", "hat_s": "hat_s"}),
                                ("LGWP-tilde", {"tilde": "tilde"})), _h_lg1),
    "GWP4": _System(_sys_gwp4, (("LGWP-bar", {"bar": "bar", "bar_s": "bar_s"}),
                                ("LGWP-star", {"star": "star", "qr": "qr"})), _h_lg1),
    "L1C12": _System(_sys_l1("L1C12"), (("PA1", {"pair": "pair"}),), _h_lwp),
    "L1": _System(_sys_l1("L1"), (("PA2", {"pair": "pair"}),),
                  lambda p, s: _h_lwp(p, s) + [("b < N - 2", p.b < p.N - 2)]),
    "sistema": _System(_sys_sistema("sistema"), (("PPM-minus", {"pair": "minus"}),
                                                 ("PPM-plus", {"pair": "plus"})), _h_lwp),
    "B1a": _System(_sys_sistema("B1a"), (("PPM-minus", {"pair": "minus"}),
                                         ("PPM-plus", {"pair": "plus"})), _h_lwp),
    "condH1sl2": _System(_sys_cond_h1sl2, (("B3-eps", {"bar": "bar", "pair": "pair"}),), _h_b3),
    "E1-ADMREL": _System(_sys_admrel, (("ADM-ball", {"ball": "ball"}),
                                       ("ADM-exterior", {"exterior": "exterior"})), _h_contraction),
}


def system_hypotheses(system_id: str, params: ProblemParams, smalls: SmallParams | None = None):
    return _system(system_id).hypotheses(params, smalls or SmallParams())


def _system(system_id: str) -> _System:
    try:
        return SYSTEMS[system_id]
    except KeyError:
        raise ValueError(f"unknown relation system {system_id!r}; choose from {sorted(SYSTEMS)}") from None


def default_pairs(system_id: str, params: ProblemParams, smalls: SmallParams | None = None,
                  variant: str = "printed") -> dict[str, ExponentPair]:
    """Roles of a system filled from the constructions."""
    out = {}
    for family, mapping in _system(system_id).defaults:
        built = lemma_pairs(family, params, smalls, variant)
        for src, dst in mapping.items():
            out[dst] = built[src]
    return out


_REQUIRED = {
    "GWP3": ("hat", "hat_s", "tilde"),
    "GWP4": ("bar", "bar_s", "star", "qr"),
    "L1C12": ("pair",),
    "L1": ("pair",),
    "condH1sl2": ("bar", "pair"),
}


def verify_relation_system(system_id: str, params: ProblemParams, smalls: SmallParams | None = None,
                           pairs: Mapping[str, ExponentPair] | None = None,
                           variant: str = "printed") -> SystemReport:
    """Evaluate one exponent system exactly.

    Parameters
    ----------
    pairs : mapping, optional
        Role to pair.  When omitted the pairs come from :func:`lemma_pairs`.
        For ``sistema``/``B1a`` the roles are ``minus`` (unit ball) and
        ``plus`` (exterior); for ``E1-ADMREL`` they are ``ball`` and
        ``exterior``; either may be given alone.
    variant : str
        Reading of the N = 3 construction used by ``condH1sl2``.

    Raises
    ------
    KeyError
        If a required role is missing.
    """
    sysd = _system(system_id)
    smalls = smalls or SmallParams()
    if pairs is None:
        pairs = default_pairs(system_id, params, smalls, variant)
    pairs = dict(pairs)
    required = _REQUIRED.get(system_id)
    if required:
        missing = [r for r in required if r not in pairs]
        if missing:
            raise KeyError(f"{system_id} needs roles {missing}")
    elif not pairs:
        raise KeyError(f"{system_id} needs at least one pair")
    rep = SystemReport(system_id)
    sysd.run(params, smalls, pairs, rep)
    return rep


def dyadic_eps(system_id: str, params: ProblemParams, theta=F(1, 1000), variant: str = "printed",
               max_halvings: int = 60):
    """Largest ``eps = 2^-k <= 1/8`` for which the system passes.

    Returns ``(eps, report)``, or ``(None, last_report)`` when no dyadic
    value up to ``2^-(3 + max_halvings)`` works.
    """
    rep = None
    for k in range(3, 3 + max_halvings + 1):
        eps = F(1, 2**k)
        sm = SmallParams(eps=eps, theta=as_fraction(theta))
        try:
            rep = verify_relation_system(system_id, params, sm, variant=variant)
        except ValueError:
            continue
        if rep.passed:
            return eps, rep
    return None, rep
