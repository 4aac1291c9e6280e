"""Deterministic CSV / Markdown emission of the regime tables and the D0 list."""

from __future__ import annotations

import csv
import io
from fractions import Fraction

from . import __version__
from .classify import (
    ExceptionalMuError,
    discriminant,
    enumerate_D0,
    ordering,
    regime,
    table_cells,
)
from .sbcwp import SbcwpParams, coefficients

__all__ = ["TABLE_IDS", "TITLES", "table_rows", "d0_rows", "render", "fmt"]

TABLE_IDS = ("4", "5", "6", "7", "8", "D0")

TITLES = {
    "4": "exponent regimes for m >= 2 (sample pairs in D, CD and D0)",
    "5": "exponent regimes for m = 1, k >= 4",
    "6": "exponent regimes for m = 1, k = 3",
    "7": "exponent regimes for m = 1, k = 2",
    "8": "exponent regimes for m = 1, k = 1 (S_F term absent)",
    "D0": "dimension pairs with a double root of the q-polynomial, 2 <= m, k <= 100",
}

COLUMNS = ("m", "k", "mu", "table", "row", "domain", "interval", "alpha", "beta", "p", "q",
           "ordering", "exponents", "regime")
D0_COLUMNS = ("m", "k", "discriminant", "double_root", "alpha", "beta", "p", "q")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return str(x)


def table_rows(which: str) -> list[dict]:
    rows = []
    for m, k, mu in table_cells(int(which)):
        try:
            c = regime(m, k, mu)
        except ExceptionalMuError:
            rows.append({"m": m, "k": k, "mu": fmt(mu), "table": which, "row": "-",
                         "domain": "-", "interval": "scalar-exceptional", "alpha": "", "beta": "",
                         "p": "", "q": "", "ordering": "", "exponents": "", "regime": ""})
            continue
        rows.append({"m": m, "k": k, "mu": fmt(mu), "table": which,
                     "row": "-" if c.row is None else str(c.row), "domain": c.domain,
                     "interval": c.interval, "alpha": fmt(c.alpha), "beta": fmt(c.beta),
                     "p": fmt(c.p), "q": fmt(c.q), "ordering": c.ordering,
                     "exponents": ordering(c.p, c.q, values=True), "regime": c.regime})
    return rows


def d0_rows(m_max: int = 100, k_max: int = 100) -> list[dict]:
    out = []
    for m, k in enumerate_D0(m_max, k_max):
        mu0 = Fraction(-2 * (m * k - 2 * (m - 1)), 2 * (m - 1) * (m + 2))
        cs = coefficients(SbcwpParams(m, k, mu0))
        p = 2 * mu0 * cs.alpha + 1
        out.append({"m": m, "k": k, "discriminant": discriminant(m, k), "double_root": fmt(mu0),
                    "alpha": fmt(cs.alpha), "beta": fmt(cs.beta), "p": fmt(p), "q": fmt(p - 2 * cs.alpha)})
    return out


def _header(which: str, prefix: str) -> list[str]:
    return [f"{prefix} table {which}: {TITLES[which]}",
            f"{prefix} labels assume S and S_F are strictly positive constants",
            f"{prefix} generated by warpcurv {__version__}; seed: none (deterministic)"]


def render(which: str, fmt_name: str = "csv") -> str:
    if which not in TABLE_IDS:
        raise ValueError(f"unknown table {which!r}; choose from {', '.join(TABLE_IDS)}")
    rows = d0_rows() if which == "D0" else table_rows(which)
    cols = D0_COLUMNS if which == "D0" else COLUMNS
    buf = io.StringIO()
    if fmt_name == "csv":
        for line in _header(which, "#"):
            buf.write(line + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([r[c] for c in cols])
    elif fmt_name == "md":
        for line in _header(which, ">"):
            buf.write(line + "\n")
        buf.write("\n| " + " | ".join(cols) + " |\n")
        buf.write("|" + "---|" * len(cols) + "\n")
        for r in rows:
            buf.write("| " + " | ".join(str(r[c]).replace("|", "\\|") for c in cols) + " |\n")
    else:
        raise ValueError(f"unsupported table format {fmt_name!r}")
    return buf.getvalue()

