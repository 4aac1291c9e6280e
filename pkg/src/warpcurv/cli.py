"""Command-line front end: ``warpcurv <subcommand> ...``.

Every emitted file starts with a provenance header (tool version, command,
seed) and contains no timestamps, so repeated runs are byte-identical.
Exit status is 0 when every check passes, 1 when a check fails and 2 for
usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from . import geometry as geo
from .bcwp import GeodesicExitError, geodesic_integrate, oracle_checks, OracleCheck
from .chartspec import ChartSpecError, load_chart_spec
from .classify import ExceptionalMuError, regime
from .einstein import (
    EinsteinProblem,
    TurningPointError,
    closed_form_mu_minus1,
    first_integral_residual,
    k1_profile,
    nested_bcwp_check,
    power_law_residuals,
    schwarzschild_general,
    schwarzschild_profile,
    solve_quadrature,
)
from .opfamilies import OpFamily, eval_H_family, eval_L, reduce
from .samples import random_bcwp_spec, random_metric_entries, random_wave
from .sbcwp import SbcwpParams, coefficients, exceptional_mus, parse_number, scalar_branch
from . import tables as tbl

THREADS_ENV = "WARPCURV_THREADS"


@dataclass
class RunConfig:
    subcommand: str
    spec: str | None = None
    out: str | None = None
    fmt: str = "csv"
    order: int = 2
    tol: float | None = None
    exact: bool = False
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tolerance must be positive")


def threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """map() over a thread pool; results keep input order."""
    n = threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# output helpers

def _num(x) -> str:
    if isinstance(x, Fraction):
        return tbl.fmt(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _header(cfg: RunConfig, argv) -> list[str]:
    return [f"warpcurv {__version__}", "command: " + " ".join(argv), f"seed: {cfg.seed}"]


def _emit_table(cfg: RunConfig, argv, columns, rows, notes=()) -> str:
    head = _header(cfg, argv) + list(notes)
    if cfg.fmt == "json":
        doc = {"meta": head, "columns": list(columns), "rows": [[_num(v) for v in r] for r in rows]}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    if cfg.fmt == "md":
        for h in head:
            buf.write(f"> {h}\n")
        buf.write("\n| " + " | ".join(columns) + " |\n|" + "---|" * len(columns) + "\n")
        for r in rows:
            buf.write("| " + " | ".join(_num(v) for v in r) + " |\n")
        return buf.getvalue()
    for h in head:
        buf.write(f"# {h}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def _write(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _check_rows(checks: list[OracleCheck]):
    return [[c.quantity, c.formula_scale, c.oracle_scale, c.discrepancy, c.tolerance,
             "PASS" if c.passed else "FAIL"] for c in checks]


CHECK_COLUMNS = ("quantity", "formula", "oracle", "discrepancy", "tolerance", "status")
VERIFY_QUANTITIES = ("gradient", "connection", "hessian", "laplacian", "riemann", "ricci", "scalar")


# ---------------------------------------------------------------------------
# subcommands

def cmd_curvature(cfg: RunConfig, args, argv) -> int:
    chart = load_chart_spec(args.spec)
    if args.verify:
        if chart.bcwp is None:
            raise ValueError("--verify needs a bcwp or sbcwp chart spec")
        tol = cfg.tol or (1e-3 if cfg.order == 2 else 1e-5)
        what = list(VERIFY_QUANTITIES) if args.what == "all" else [args.what]
        checks = oracle_checks(chart.bcwp, tol, cfg.order, what=what)
        _write(cfg, _emit_table(cfg, argv, CHECK_COLUMNS, _check_rows(checks)))
        return 0 if all(c.passed for c in checks) else 1
    g = chart.metric
    q = args.quantity
    margin = 2 * geo.stencil_radius(cfg.order)
    if q == "scalar":
        f = geo.scalar_curvature(g, cfg.order)
        vals, labels = f.values[..., None], ["S"]
    elif q == "ricci":
        f = geo.ricci(g, cfg.order)
        idx = [(i, j) for i in range(g.dim) for j in range(i, g.dim)]
        vals = np.stack([f.components[..., i, j] for i, j in idx], axis=-1)
        labels = [f"Ric_{i}{j}" for i, j in idx]
    else:
        f = geo.christoffel(g, cfg.order)
        idx = [(k, i, j) for k in range(g.dim) for i in range(g.dim) for j in range(i, g.dim)]
        vals = np.stack([f.components[..., k, i, j] for k, i, j in idx], axis=-1)
        labels = [f"Gamma^{k}_{i}{j}" for k, i, j in idx]
    mask = f.mask & g.grid.interior(margin)
    mesh = g.grid.mesh()
    rows = []
    for pos in zip(*np.nonzero(mask)):
        rows.append([m[pos] for m in mesh] + list(vals[pos]))
    _write(cfg, _emit_table(cfg, argv, list(g.grid.names) + labels, rows))
    return 0


def _parse_mu(text: str, exact: bool):
    val = parse_number(text)
    return val if exact else float(val)


def cmd_sbcwp(cfg: RunConfig, args, argv) -> int:
    mu = _parse_mu(args.mu, cfg.exact)
    p = SbcwpParams(args.m, args.k, mu)
    cs = coefficients(p)
    rows = [[name, "undefined" if v is None else v] for name, v in cs.items()]
    rows.append(["scalar_branch", scalar_branch(p)])
    for e in exceptional_mus(args.m, args.k).values:
        rows.append([f"exceptional:{e.label}", str(e.value)])
    notes = [f"note: {n}" for n in cs.notes]
    _write(cfg, _emit_table(cfg, argv, ("name", "value"), rows, notes))
    return 0


def cmd_classify(cfg: RunConfig, args, argv) -> int:
    mu = parse_number(args.mu)
    try:
        c = regime(args.m, args.k, mu)
    except ExceptionalMuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.fmt == "json":
        doc = {"meta": _header(cfg, argv), "m": c.m, "k": c.k, "mu": _num(c.mu), "alpha": _num(c.alpha),
               "beta": _num(c.beta), "p": _num(c.p), "q": None if c.q is None else _num(c.q),
               "ordering": c.ordering, "regime": c.regime, "table": c.table,
               "row": c.row, "interval": c.interval, "disclaimer": c.disclaimer}
        _write(cfg, json.dumps(doc, indent=1) + "\n")
    else:
        _write(cfg, c.summary() + "\n")
    return 0


def cmd_tables(cfg: RunConfig, args, argv) -> int:
    fmt = "md" if cfg.fmt == "md" else "csv"
    which = tbl.TABLE_IDS if args.which == "all" else (args.which,)
    parts = [tbl.render(w, fmt) for w in which]
    _write(cfg, "\n".join(parts))
    return 0


def cmd_einstein(cfg: RunConfig, args, argv) -> int:
    if args.kind == "m1":
        return _einstein_m1(cfg, args, argv)
    if args.kind == "schwarzschild":
        lam, nu, C = (parse_number(x) for x in (args.lam, args.nu, args.C))
        terms = schwarzschild_general(args.k, lam, nu, C)
        euler, first = power_law_residuals(args.k, lam, nu, terms)
        sol = schwarzschild_profile(args.k, lam, nu, C, (args.r0, args.r1), args.n)
        tol = cfg.tol or 1e-10
        notes = [f"u2 terms: " + " + ".join(f"({tbl.fmt(c)}) r^({tbl.fmt(e)})" for e, c in sorted(terms.items())),
                 f"exact Euler residual: {'0' if not euler else euler}",
                 f"exact first-order residual: {'0' if not first else first}",
                 f"numerical Euler residual: {sol.residual:.3e} (tol {tol:.1e})"]
        rows = [[r, v] for r, v in zip(sol.r, sol.profile)]
        _write(cfg, _emit_table(cfg, argv, ("r", "u2"), rows, notes))
        return 0 if (not euler and not first and sol.residual <= tol) else 1
    rep = nested_bcwp_check(args.M, args.k, args.lam_value, args.nu_value, args.time_sign,
                            h=args.h, order=cfg.order)
    tol = cfg.tol or 1e-3
    checks = [OracleCheck("metric equality", 0.0, 0.0, rep.metric_gap, 1e-10),
              OracleCheck("fiber coefficient", 0.0, 0.0, rep.fiber_coefficient_gap, 1e-10)]
    checks += [OracleCheck(f"Ric - lam g (r={r})", 0.0, 0.0, d, tol) for r, d in rep.ricci]
    checks += [OracleCheck(f"functional (r={r})", 0.0, 0.0, d, tol) for r, d in rep.functional]
    _write(cfg, _emit_table(cfg, argv, CHECK_COLUMNS, _check_rows(checks)))
    return 0 if all(c.passed for c in checks) else 1


def _einstein_m1(cfg, args, argv) -> int:
    lam, nu = float(args.lam), float(args.nu)
    if args.k == 1:
        r = np.linspace(args.r0, args.r1, args.n)
        sol = k1_profile(lam, r, args.sign, args.a, args.b)
        notes = [f"residual of v'' = -2 eps lam: {sol.residual:.3e}"]
    else:
        prob = EinsteinProblem(args.k, nu, lam, args.sign, float(args.mu))
        if args.gamma is not None:
            if float(args.mu) != -1.0:
                raise ValueError("--gamma selects the closed form, which needs mu = -1")
            sol = closed_form_mu_minus1(args.k, nu, lam, args.gamma, args.sign, (args.r0, args.r1), args.n)
        else:
            if args.v0 is None:
                raise ValueError("give --gamma (closed form, mu = -1) or --v0 (quadrature)")
            sol = solve_quadrature(prob, args.v0, (args.r0, args.r1), args.branch, args.n)
        notes = [f"kind: {sol.kind}", f"solver residual: {sol.residual:.3e}",
                 "positivity domain: " + ", ".join(f"[{a!r}, {b!r}]" for a, b in sol.domain),
                 "turning points: " + (", ".join(repr(t) for t in sol.turning_points) or "none")]
        if len(sol.r) >= 9 and np.all(sol.profile > 0):
            rep = first_integral_residual(prob, sol.r, sol.profile)
            notes.append(f"first-integral residual (FD): {rep.max():.3e}")
    rows = [[r, v] for r, v in zip(sol.r, sol.profile)]
    _write(cfg, _emit_table(cfg, argv, ("r", "v"), rows, notes))
    return 0


# ---------------------------------------------------------------------------
# verify

def _verify_bcwp(seed: int, order: int, tol: float) -> list[OracleCheck]:
    rng = np.random.default_rng(seed)
    m, k = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    signs = [1, 1] if rng.random() < 0.5 else [1, -1]
    spec = random_bcwp_spec(rng, m, k, base_sign=signs[0], fiber_sign=signs[1])
    out = oracle_checks(spec, tol, order)
    return [OracleCheck(f"bcwp[{seed}] m={m} k={k} {c.quantity}", c.formula_scale, c.oracle_scale,
                        c.discrepancy, c.tolerance) for c in out]


def _verify_opfamily(seed: int, order: int, tol: float) -> list[OracleCheck]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    terms = tuple((float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))) for _ in range(int(rng.integers(1, 4))))
    fam = OpFamily(terms)
    grid = geo.ChartGrid.centered([f"x{i}" for i in range(n)], rng.uniform(-0.5, 0.5, n), 1e-2, 9)
    g = geo.MetricField.from_functions(grid, random_metric_entries(rng, n))
    wave = random_wave(rng, n)
    v = grid.sample(lambda *x: np.exp(wave(*x)))
    ev = eval_L(fam, g, v, order)
    out = [OracleCheck(f"opfamily[{seed}] L closed", geo.field_scale(ev.closed), geo.field_scale(ev.literal),
                       geo.max_discrepancy(ev.closed, ev.literal, order=order), tol)]
    if ev.reduced is not None:
        # v^(1/alpha) has derivatives growing like 1/alpha^2, and so does the truncation error
        red = reduce(fam)
        widen = max(1.0, abs(float(red.beta)) / float(red.alpha) ** 2)
        out.append(OracleCheck(f"opfamily[{seed}] L reduced", geo.field_scale(ev.reduced),
                               geo.field_scale(ev.literal),
                               geo.max_discrepancy(ev.reduced, ev.literal, order=order), tol * widen))
    hv = eval_H_family(fam, g, v, order)
    out.append(OracleCheck(f"opfamily[{seed}] H closed", geo.field_scale(hv.closed), geo.field_scale(hv.literal),
                           geo.max_discrepancy(hv.closed, hv.literal, order=order), tol))
    return out


def _verify_einstein(seed: int, order: int, tol: float) -> list[OracleCheck]:
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 6))
    lam = float(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0))
    nu = float(rng.uniform(-1, 2))
    eps = int(rng.choice([-1, 1]))
    gamma = float(rng.uniform(-0.5, 0.5))
    sol = closed_form_mu_minus1(k, nu, lam, gamma, eps, (-3, 3), 201)
    return [OracleCheck(f"einstein[{seed}] first integral (closed form)", 0.0, 0.0, sol.residual, 1e-10)]


SUITES = {"bcwp": _verify_bcwp, "opfamilies": _verify_opfamily, "einstein": _verify_einstein}


def cmd_verify(cfg: RunConfig, args, argv) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    tol = cfg.tol or (1e-3 if cfg.order == 2 else 1e-5)
    jobs = [(name, cfg.seed * 1000 + i) for name in names for i in range(args.count)]
    results = ordered_map(lambda job: SUITES[job[0]](job[1], cfg.order, tol), jobs)
    checks = [c for r in results for c in r]
    _write(cfg, _emit_table(cfg, argv, CHECK_COLUMNS, _check_rows(checks)))
    return 0 if all(c.passed for c in checks) else 1


def cmd_geodesic(cfg: RunConfig, args, argv) -> int:
    chart = load_chart_spec(args.spec)
    if chart.bcwp is None:
        raise ValueError("geodesic needs a bcwp or sbcwp chart spec")
    point = [float(x) for x in args.point.split(",")]
    vel = [float(x) for x in args.velocity.split(",")]
    status = 0
    try:
        res = geodesic_integrate(chart.bcwp, point, vel, args.step, args.steps)
    except GeodesicExitError as exc:
        res, status = exc.result, 1
        if res is None:
            raise
    n = len(point)
    cols = ["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)] + \
        ["base_residual", "fiber_residual"]
    rows = [[t] + list(x) + list(v) + [b, f] for t, x, v, b, f in
            zip(res.times, res.points, res.velocities, res.base_residual, res.fiber_residual)]
    _write(cfg, _emit_table(cfg, argv, cols, rows))
    return status


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warpcurv", description="Curvature of base conformal warped products.")
    p.add_argument("--version", action="version", version=f"warpcurv {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="fmt", choices=("csv", "md", "json"), default="csv")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--order", type=int, choices=(2, 4), default=2, help="finite-difference order")
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("curvature", parents=[common], help="oracle curvature of a chart-spec metric")
    s.add_argument("--spec", required=True)
    s.add_argument("--quantity", choices=("scalar", "ricci", "christoffel"), default="scalar")
    s.add_argument("--verify", action="store_true",
                   help="compare the product block formulas with the oracle (bcwp specs only)")
    s.add_argument("--what", choices=VERIFY_QUANTITIES + ("all",), default="all")

    s = sub.add_parser("sbcwp", parents=[common], help="coefficients of the one-function product")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--mu", required=True, help="number or fraction such as -1/2")
    s.add_argument("--exact", action="store_true", help="exact rational arithmetic")

    s = sub.add_parser("classify", parents=[common], help="exponents p, q and their regime")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--mu", required=True)

    s = sub.add_parser("tables", parents=[common], help="emit regime tables")
    s.add_argument("--which", choices=tbl.TABLE_IDS + ("all",), default="all")

    s = sub.add_parser("einstein", help="Einstein-condition solvers")
    es = s.add_subparsers(dest="kind", required=True)
    e = es.add_parser("m1", parents=[common], help="interval base")
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--nu", default="0")
    e.add_argument("--lambda", dest="lam", required=True)
    e.add_argument("--mu", default="-1")
    e.add_argument("--sign", choices=("+", "-"), default="+", help="sign of dr^2")
    e.add_argument("--gamma", type=float, default=None)
    e.add_argument("--v0", type=float, default=None)
    e.add_argument("--branch", choices=("+", "-"), default="+", help="sign of v'")
    e.add_argument("--a", type=float, default=0.0)
    e.add_argument("--b", type=float, default=1.0)
    e.add_argument("--r0", type=float, default=0.0)
    e.add_argument("--r1", type=float, default=1.0)
    e.add_argument("--n", type=int, default=101)
    e = es.add_parser("schwarzschild", parents=[common], help="two-dimensional base, Euler profile")
    e.add_argument("--k", type=int, default=2)
    e.add_argument("--lambda", dest="lam", default="0")
    e.add_argument("--nu", default="1")
    e.add_argument("--C", default="-2")
    e.add_argument("--r0", type=float, default=3.0)
    e.add_argument("--r1", type=float, default=5.0)
    e.add_argument("--n", type=int, default=21)
    e = es.add_parser("check-nested", parents=[common], help="oracle check of the nested metric")
    e.add_argument("--M", type=float, default=1.0)
    e.add_argument("--k", type=int, default=2)
    e.add_argument("--lambda", dest="lam_value", type=float, default=0.0)
    e.add_argument("--nu", dest="nu_value", type=float, default=1.0)
    e.add_argument("--time-sign", dest="time_sign", choices=("+", "-"), default="-")
    e.add_argument("--h", type=float, default=1e-2)

    s = sub.add_parser("verify", parents=[common], help="randomized formula-versus-oracle sweeps")
    s.add_argument("--suite", choices=tuple(SUITES) + ("all",), default="all")
    s.add_argument("--count", type=int, default=3)

    s = sub.add_parser("geodesic", parents=[common], help="integrate a geodesic of a product chart spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--point", required=True, help="comma-separated coordinates")
    s.add_argument("--velocity", required=True)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--step", type=float, default=None)
    return p


COMMANDS = {"curvature": cmd_curvature, "sbcwp": cmd_sbcwp, "classify": cmd_classify, "tables": cmd_tables,
            "einstein": cmd_einstein, "verify": cmd_verify, "geodesic": cmd_geodesic}


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Turn '--mu -1/2' into '--mu=-1/2' so negative fractions are not read as options."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt is not None and len(nxt) > 1 \
                and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, getattr(args, "spec", None), args.out, args.fmt, args.order, args.tol,
                        getattr(args, "exact", False), args.seed)
        return COMMANDS[args.command](cfg, args, ["warpcurv"] + argv)
    except ChartSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TurningPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
