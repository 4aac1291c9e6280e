"""Exponents of the scalar-curvature relation and their regime classification.

The reduced relation reads -beta Lap u + S_B u = S u^p - S_F u^q with
p = 2 mu alpha + 1 and q = p - 2 alpha.  Everything here is exact when the
inputs are integers or Fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

from .sbcwp import SbcwpParams, coefficients

__all__ = [
    "ExceptionalMuError",
    "NonlinearityClass",
    "DMembership",
    "alpha_beta",
    "pq",
    "q_numerator",
    "p_numerator",
    "discriminant",
    "membership_D",
    "enumerate_D0",
    "q_roots",
    "regime",
    "exponent_label",
    "ordering",
    "SobolevThresholds",
    "sobolev_thresholds",
    "AsymptoticReport",
    "asymptotics",
    "DISCLAIMER",
]

DISCLAIMER = "labels assume S and S_F are strictly positive constants"


class ExceptionalMuError(ValueError):
    """The scalar relation has no (alpha, beta) reduction at this mu."""


def _q(x):
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, int):
        return Fraction(x)
    return x


def alpha_beta(m: int, k: int, mu):
    cs = coefficients(SbcwpParams(m, k, _q(mu)))
    if not cs.scalar_valid:
        raise ExceptionalMuError(f"mu={mu} is scalar-exceptional for (m,k)=({m},{k})")
    return cs.alpha, cs.beta


def pq(m: int, k: int, mu):
    """(p, q) = (2 mu alpha + 1, 2 (mu - 1) alpha + 1)."""
    mu = _q(mu)
    a, _ = alpha_beta(m, k, mu)
    p = 2 * mu * a + 1
    return p, p - 2 * a


def q_numerator(m: int, k: int, mu):
    """Numerator of q over eta (m >= 2); it carries the sign of q."""
    return (m - 1) * (m + 2) * mu * mu + 2 * (m * k - 2 * (m - 1)) * mu + (k - 3) * k


def p_numerator(m: int, k: int, mu):
    """Numerator of p over eta (m >= 2); it carries the sign of p."""
    return (m - 1) * (m + 2) * mu * mu + 2 * m * k * mu + (k + 1) * k


def discriminant(m: int, k: int) -> int:
    """Discriminant of q_numerator in mu, in factored closed form."""
    return -4 * ((m - 2) * k - 4 * (m - 1)) * (k + m - 1)


@dataclass(frozen=True)
class DMembership:
    in_D: bool
    discriminant: int
    in_D0: bool


def membership_D(m: int, k: int) -> DMembership:
    if m < 2 or k < 1:
        raise ValueError("the set D is defined for m >= 2, k >= 1")
    d = discriminant(m, k)
    return DMembership(d < 0, d, d == 0)


def enumerate_D0(m_max: int = 100, k_max: int = 100) -> list[tuple[int, int]]:
    return [(m, k) for m in range(2, m_max + 1) for k in range(1, k_max + 1) if discriminant(m, k) == 0]


def _exact_sqrt(n: Fraction):
    """Square root of a non-negative rational: Fraction when exact, float otherwise."""
    n = Fraction(n)
    a, b = n.numerator, n.denominator
    ra, rb = math.isqrt(a), math.isqrt(b)
    if ra * ra == a and rb * rb == b:
        return Fraction(ra, rb)
    return math.sqrt(n)


def q_roots(m: int, k: int):
    """Roots mu_- <= mu_+ of q_numerator (q = 0); exact Fractions when the discriminant is a square."""
    d = discriminant(m, k)
    if d < 0:
        raise ValueError(f"(m,k)=({m},{k}) is in D: q_numerator has no real roots")
    a = (m - 1) * (m + 2)
    b = 2 * (m * k - 2 * (m - 1))
    s = _exact_sqrt(Fraction(d))
    if isinstance(s, Fraction):
        return Fraction(-b, 1) / (2 * a) - s / (2 * a), Fraction(-b, 1) / (2 * a) + s / (2 * a)
    return (-b - s) / (2 * a), (-b + s) / (2 * a)


# ---------------------------------------------------------------------------
# labels and orderings

def _sign(x) -> int:
    return (x > 0) - (x < 0)


def exponent_label(e) -> str:
    if e > 1:
        return "super-lin"
    if e == 1:
        return "lin"
    if e > 0:
        return "sub-lin"
    if e == 0:
        return "non-hom"
    return "sing"


def ordering(p, q=None, values: bool = False) -> str:
    """Chain such as 'q<0<p<1' placing the exponents against the landmarks 0 and 1.

    With ``values`` every exponent shows its value and landmarks appear only where they
    coincide with an exponent, as in 'q=0<p=2' or 'q=1<p=3'.
    """
    items = [("p", p)] if q is None else [("q", q), ("p", p)]
    lo = min(v for _, v in items)
    hi = max(v for _, v in items)
    marks = [("0", 0), ("1", 1)]
    if values:
        groups = []
        for v in sorted({x for _, x in items}):
            names = [n for n, x in items if x == v] + [n for n, x in marks if x == v]
            groups.append("=".join(names) if any(x == v for _, x in marks) else "=".join(names + [str(v)]))
        return "<".join(groups)
    chosen = [(n, v) for n, v in marks if lo <= v <= hi]
    tied_lo = any(v == lo for _, v in chosen)
    tied_hi = any(v == hi for _, v in chosen)
    below = [(n, v) for n, v in marks if v < lo]
    above = [(n, v) for n, v in marks if v > hi]
    if below and not tied_lo:
        chosen.append(max(below, key=lambda t: t[1]))
    if above and not tied_hi:
        chosen.append(min(above, key=lambda t: t[1]))
    entries = items + chosen
    levels = sorted({v for _, v in entries})
    groups = []
    for v in levels:
        names = [n for n, x in items if x == v] + [n for n, x in chosen if x == v]
        groups.append("=".join(names))
    return "<".join(groups)


# ---------------------------------------------------------------------------
# table rows

TABLE4_ROWS = {
    1: ("all", "(-inf, -k/(m-1))"),
    2: ("D", "(-k/(m-1), 0)"),
    3: ("CD", "(-k/(m-1), 0) & (mu-, mu+)"),
    4: ("CD", "(-k/(m-1), 0) & C[mu-, mu+]"),
    5: ("CD", "(-k/(m-1), 0) & {mu-, mu+}"),
    6: ("D", "(0, 1)"),
    7: ("CD", "(0, 1) & (mu-, mu+)"),
    8: ("CD", "(0, 1) & C[mu-, mu+]"),
    9: ("CD", "(0, 1) & {mu-, mu+}"),
    10: ("all", "(1, inf)"),
}

TABLE5_ROWS = {
    1: "(-inf, -k1)", 2: "{-k1}", 3: "(-k1, 2-k1)", 4: "{2-k1}", 5: "(2-k1, 0)",
    6: "(0, 1)", 7: "{1}", 8: "(1, k1)", 9: "(k1, inf)",
}
TABLE6_ROWS = {1: "(-inf, -2)", 2: "{-2}", 3: "(-2, 0)", 4: "(0, 1)", 5: "{1}", 6: "(1, 2)", 7: "(2, inf)"}
TABLE7_ROWS = {
    1: "(-inf, -3/2)", 2: "{-3/2}", 3: "(-3/2, 0)", 4: "(0, 1/2)", 5: "{1/2}",
    6: "(1/2, 1)", 7: "{1}", 8: "(1, 3/2)", 9: "(3/2, inf)",
}
TABLE8_ROWS = {1: "(-inf, -1)", 2: "{-1}", 3: "(-1, 0)", 4: "(0, 1)", 5: "(1, inf)"}


def table_for(m: int, k: int) -> int:
    if m >= 2:
        return 4
    return {1: 8, 2: 7, 3: 6}.get(k, 5)


def _row_m_ge_2(m, k, mu, member: DMembership):
    s = Fraction(-k, m - 1)
    if mu < s:
        return 1
    if mu > 1:
        return 10
    if mu in (s, 0, 1):
        return None
    start = 2 if mu < 0 else 6
    if member.in_D:
        return start
    r = q_numerator(m, k, mu)
    if r < 0:
        return start + 1
    if r > 0:
        return start + 2
    return start + 3


def _row_m1(k, mu):
    k1 = Fraction(k + 1, 2)
    # breakpoints per table, each followed by the open interval to its right
    if k >= 4:
        points = [-k1, 2 - k1, Fraction(0), Fraction(1), k1]
        tabulated = {-k1: 2, 2 - k1: 4, Fraction(1): 7}
        intervals = [1, 3, 5, 6, 8, 9]
    elif k == 3:
        points = [Fraction(-2), Fraction(0), Fraction(1), Fraction(2)]
        tabulated = {Fraction(-2): 2, Fraction(1): 5}
        intervals = [1, 3, 4, 6, 7]
    elif k == 2:
        points = [Fraction(-3, 2), Fraction(0), Fraction(1, 2), Fraction(1), Fraction(3, 2)]
        tabulated = {Fraction(-3, 2): 2, Fraction(1, 2): 5, Fraction(1): 7}
        intervals = [1, 3, 4, 6, 8, 9]
    elif k == 1:
        points = [Fraction(-1), Fraction(0), Fraction(1)]
        tabulated = {Fraction(-1): 2}
        intervals = [1, 3, 4, 5]
    else:
        return None
    for pt in points:
        if mu == pt:
            return tabulated.get(pt)
    idx = sum(1 for pt in points if mu > pt)
    return intervals[idx]


def _row_label(table: int, row: int | None) -> tuple[str, str]:
    if row is None:
        return "-", "not tabulated"
    if table == 4:
        return TABLE4_ROWS[row]
    text = {5: TABLE5_ROWS, 6: TABLE6_ROWS, 7: TABLE7_ROWS, 8: TABLE8_ROWS}[table][row]
    return "all", text


@dataclass(frozen=True)
class NonlinearityClass:
    m: int
    k: int
    mu: object
    alpha: object
    beta: object
    p: object
    q: object | None
    p_label: str
    q_label: str | None
    alpha_sign: int
    in_D: bool | None
    roots: tuple | None
    table: int
    row: int | None
    domain: str
    interval: str
    disclaimer: str = field(default=DISCLAIMER)

    @property
    def ordering(self) -> str:
        return ordering(self.p, self.q)

    @property
    def regime(self) -> str:
        if self.q_label is None or self.q_label == self.p_label:
            return self.p_label
        return f"{self.p_label}/{self.q_label}"

    def summary(self) -> str:
        return f"{ordering(self.p, self.q, values=True)}, {self.regime}"


def regime(m: int, k: int, mu) -> NonlinearityClass:
    """Exponent positions, regime labels and table row for (m, k, mu)."""
    mu = _q(mu)
    alpha, beta = alpha_beta(m, k, mu)
    p, q = pq(m, k, mu)
    table = table_for(m, k)
    exact = isinstance(mu, Rational)
    if m >= 2:
        member = membership_D(m, k) if k >= 1 else None
        roots = None
        if member is not None and not member.in_D:
            roots = q_roots(m, k)
        row = _row_m_ge_2(m, k, Fraction(mu) if exact else mu, member) if member else None
        in_D = member.in_D if member else None
    else:
        roots, in_D = None, None
        row = _row_m1(k, Fraction(mu)) if exact else _row_m1(k, mu)
    # with a one-dimensional fiber and base the S_F u^q term is absent (S_F = 0)
    only_p = m == 1 and k == 1
    domain, interval = _row_label(table, row)
    return NonlinearityClass(
        m, k, mu, alpha, beta, p, None if only_p else q,
        exponent_label(p), None if only_p else exponent_label(q),
        _sign(alpha), in_D, roots, table, row, domain, interval,
    )


# ---------------------------------------------------------------------------
# Sobolev thresholds and large-|mu| limits

@dataclass(frozen=True)
class SobolevThresholds:
    mu_pY: Fraction
    mu_qY: Fraction
    p_Y: Fraction
    alpha_at_pY: Fraction
    beta_at_pY: Fraction
    q_at_pY: Fraction
    alpha_at_qY: Fraction
    beta_at_qY: Fraction


def sobolev_thresholds(m: int, k: int) -> SobolevThresholds:
    """mu where p (resp. q) equals the critical exponent (m+2)/(m-2)."""
    if m < 3:
        raise ValueError("the critical exponent needs m >= 3")
    mu_p = Fraction(-(k + 1), m - 2)
    mu_q = Fraction(-k, m - 2)
    a_p, b_p = alpha_beta(m, k, mu_p)
    _, q_p = pq(m, k, mu_p)
    a_q, b_q = alpha_beta(m, k, mu_q)
    return SobolevThresholds(mu_p, mu_q, Fraction(m + 2, m - 2), a_p, b_p, q_p, a_q, b_q)


@dataclass(frozen=True)
class AsymptoticReport:
    m: int
    k: int
    mus: tuple
    beta: tuple
    p: tuple
    q: tuple
    alpha_mu: tuple
    beta_limit: Fraction
    p_limit: Fraction
    alpha_mu_limit: Fraction

    def max_errors(self) -> dict[str, float]:
        return {
            "beta": max(abs(float(b - self.beta_limit)) for b in self.beta),
            "p": max(abs(float(x - self.p_limit)) for x in self.p),
            "q": max(abs(float(x - self.p_limit)) for x in self.q),
            "alpha_mu": max(abs(float(x - self.alpha_mu_limit)) for x in self.alpha_mu),
        }

    def monotone(self) -> bool:
        """Errors shrink along the sequence when it is ordered by increasing |mu|."""
        order = sorted(range(len(self.mus)), key=lambda i: abs(self.mus[i]))
        errs = [abs(self.beta[i] - self.beta_limit) for i in order]
        return all(b <= a for a, b in zip(errs, errs[1:]))


def asymptotics(m: int, k: int, mus: Iterable) -> AsymptoticReport:
    """alpha, beta, p, q along a sequence of mu; limits 4(m-1)/(m-2), (m+2)/(m-2), 2/(m-2)."""
    if m < 3:
        raise ValueError("the large-|mu| limits need m >= 3")
    mus = tuple(_q(mu) for mu in mus)
    betas, ps, qs, ams = [], [], [], []
    for mu in mus:
        a, b = alpha_beta(m, k, mu)
        p, q = pq(m, k, mu)
        betas.append(b)
        ps.append(p)
        qs.append(q)
        ams.append(a * mu)
    return AsymptoticReport(m, k, mus, tuple(betas), tuple(ps), tuple(qs), tuple(ams),
                            Fraction(4 * (m - 1), m - 2), Fraction(m + 2, m - 2), Fraction(2, m - 2))


# ---------------------------------------------------------------------------
# sample cells for table emission

TABLE4_PAIRS = ((3, 9), (6, 4), (8, 2), (2, 3), (3, 8), (4, 6), (6, 5))
TABLE5_KS = (4, 5)


def _samples(points: Sequence[Fraction]) -> list[Fraction]:
    pts = sorted(set(points))
    out = [pts[0] - 1]
    for a, b in zip(pts, pts[1:]):
        out += [a, (a + b) / 2]
    out += [pts[-1], pts[-1] + 1]
    return out


def table_cells(which: int) -> list[tuple[int, int, Fraction]]:
    """(m, k, mu) cells: one rational mu per open interval between breakpoints plus each breakpoint."""
    cells = []
    if which == 4:
        for m, k in TABLE4_PAIRS:
            pts = [Fraction(-k, m - 1), Fraction(0), Fraction(1)]
            if not membership_D(m, k).in_D:
                pts += [r for r in q_roots(m, k) if isinstance(r, Fraction)]
            cells += [(m, k, mu) for mu in _samples(pts)]
        return cells
    ks = {5: TABLE5_KS, 6: (3,), 7: (2,), 8: (1,)}[which]
    for k in ks:
        k1 = Fraction(k + 1, 2)
        pts = [-k1, 2 - k1, Fraction(0), Fraction(1), k1]
        cells += [(1, k, mu) for mu in _samples(pts)]
    return cells
