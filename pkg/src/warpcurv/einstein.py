"""Einstein conditions for (psi, mu) products over an interval and over a 2D base.

Interval base (m = 1) with v = psi^(1 - mu):

    (a)  lam v^(2 mu/(1-mu)) = eps k/(mu-1) v''/v
    (b)  lam v^(2/(1-mu))    = nu - eps v^2/(k-mu) (v^t)''/v^t,   t = (k-mu)/(1-mu)
    first integral  (k-1) (eps v'^2/(1-mu)^2 + (lam/k) v^(2/(1-mu))) = nu

where eps = +1 for the base metric +dr^2 and -1 for -dr^2.  The branch sign of
v' is carried separately from eps.

Two-dimensional base with mu = (1-k)/2 and psi = s^(1/k): the profile u^2(r)
solves an Euler equation whose accepted solutions are
lam/(1-a1^2) r^a1 + nu/(1-a2^2) r^a2 + C/r with a1 = 1 + 2/k, a2 = 1 - 2/k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from . import geometry as geo
from .bcwp import BcwpSpec, assemble, lift_fiber
from .geometry import Axis, ChartGrid, MetricField, ScalarField
from .sbcwp import SbcwpParams, coefficients, exceptional_mus

__all__ = [
    "EinsteinProblem",
    "EinsteinSolution",
    "TurningPointError",
    "FirstIntegralReport",
    "first_integral",
    "first_integral_residual",
    "radicand",
    "adaptive_simpson",
    "solve_quadrature",
    "closed_form_mu_minus1",
    "k1_profile",
    "trace_compat",
    "schwarzschild_general",
    "schwarzschild_profile",
    "euler_operator",
    "first_order_operator",
    "power_law_residuals",
    "spurious_filter",
    "SpuriousReport",
    "NestedReport",
    "nested_metric",
    "nested_bcwp_check",
    "laplacian_integral",
    "trace_power",
]


class TurningPointError(ValueError):
    """The quadrature radicand vanishes (or is negative) where the solution should start."""


def _sign(s) -> int:
    if s in (1, "+", "plus"):
        return 1
    if s in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be + or -, got {s!r}")


@dataclass(frozen=True)
class EinsteinProblem:
    """Interval-base Einstein system; lam may be a callable only when k = 1."""

    k: int
    nu: float
    lam: float | Callable
    metric_sign: int = 1
    mu: float = -1.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        object.__setattr__(self, "metric_sign", _sign(self.metric_sign))
        # with m = 1 the total dimension is 1 + k, so lam is forced constant once k >= 2
        if callable(self.lam) and self.k >= 2:
            raise ValueError("lam must be constant when m + k >= 3")
        if self.k == 1 and self.nu != 0:
            raise ValueError("a one-dimensional fiber has nu = 0")

    @property
    def exponent(self) -> float:
        """2/(1 - mu), the power of v in the first integral."""
        return 2.0 / (1.0 - float(self.mu))

    def check_mu(self):
        mu = float(self.mu)
        bad = [float(e.value) for e in exceptional_mus(1, self.k).ricci()]
        for b in bad:
            if abs(mu - b) < 1e-12:
                raise ValueError(f"mu = {self.mu} is exceptional for k = {self.k}")


@dataclass(frozen=True, eq=False)
class EinsteinSolution:
    kind: str
    r: np.ndarray
    profile: np.ndarray
    metric_sign: int
    branch: int | None
    constants: dict
    domain: tuple[tuple[float, float], ...]
    turning_points: tuple[float, ...] = ()
    residual: float = 0.0
    fn: Callable | None = field(default=None, repr=False)

    def positive_on_domain(self) -> bool:
        ok = np.zeros(self.r.shape, dtype=bool)
        for a, b in self.domain:
            ok |= (self.r > a) & (self.r < b)
        return bool(np.all(self.profile[ok] > 0))


# ---------------------------------------------------------------------------
# interval base: first integral

def first_integral(prob: EinsteinProblem, v, dv):
    """(k-1)(eps v'^2/(1-mu)^2 + (lam/k) v^(2/(1-mu))); equals nu on solutions."""
    mu = float(prob.mu)
    k = prob.k
    return (k - 1) * (prob.metric_sign * dv ** 2 / (1 - mu) ** 2
                      + prob.lam / k * np.asarray(v, dtype=float) ** prob.exponent)


@dataclass(frozen=True, eq=False)
class FirstIntegralReport:
    first_integral: np.ndarray
    eq_a: np.ndarray
    eq_b: np.ndarray
    mask: np.ndarray

    def max(self, which: str = "first_integral") -> float:
        return geo.pairwise_max(np.abs(getattr(self, which))[self.mask])


def _line_grid(r: np.ndarray) -> ChartGrid:
    r = np.asarray(r, dtype=float)
    h = float(r[1] - r[0])
    if not np.allclose(np.diff(r), h, rtol=1e-9, atol=0):
        raise ValueError("profile must be sampled on a uniform grid")
    return ChartGrid((Axis("r", float(r[0]), h, len(r)),))


def first_integral_residual(prob: EinsteinProblem, r, v, order: int = 4) -> FirstIntegralReport:
    """Residuals of the first integral and of equations (a), (b) with FD derivatives of v."""
    if prob.k == 1:
        raise ValueError("with k = 1 the first integral carries no information")
    prob.check_mu()
    v = np.asarray(v, dtype=float)
    if not np.all(v > 0):
        raise ValueError("v must be positive")
    grid = _line_grid(r)
    f = ScalarField(grid, v)
    dv = geo.partial_derivative(f, 0, order)
    d2v = geo.second_partial(f, 0, 0, order)
    mu, k, eps, lam, nu = float(prob.mu), prob.k, prob.metric_sign, prob.lam, prob.nu
    fi = first_integral(prob, v, dv.values) - nu
    eq_a = lam * v ** (2 * mu / (1 - mu)) - eps * k / (mu - 1) * d2v.values / v
    t = (k - mu) / (1 - mu)
    d2vt = geo.second_partial(f ** t, 0, 0, order)
    eq_b = lam * v ** prob.exponent - nu + eps * v ** 2 / (k - mu) * d2vt.values / v ** t
    mask = dv.mask & d2v.mask & d2vt.mask & grid.interior(2 * geo.stencil_radius(order))
    return FirstIntegralReport(fi, eq_a, eq_b, mask)


def radicand(prob: EinsteinProblem, w):
    """eps (1-mu)^2 (nu/(k-1) - (lam/k) w^(2/(1-mu))), the square of v'."""
    mu, k = float(prob.mu), prob.k
    return prob.metric_sign * (1 - mu) ** 2 * (prob.nu / (k - 1) - prob.lam / k * np.asarray(w, dtype=float) ** prob.exponent)


# ---------------------------------------------------------------------------
# quadrature

def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 60) -> float:
    """Adaptive Simpson rule with Richardson correction."""
    if a == b:
        return 0.0

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def _turning_value(prob: EinsteinProblem) -> float | None:
    """Positive w with zero radicand, if any."""
    lam, nu, k = prob.lam, prob.nu, prob.k
    if lam == 0:
        return None
    base = k * nu / (lam * (k - 1))
    if base <= 0:
        return None
    return base ** (1.0 / prob.exponent)


class _Integral:
    """F(v) = int_{v0}^{v} dw / sqrt(R(w)), with a sqrt substitution toward a turning point."""

    def __init__(self, prob: EinsteinProblem, v0: float, tol: float):
        self.prob, self.v0, self.tol = prob, v0, tol
        self.wt = _turning_value(prob)

    def _inv(self, w):
        rad = float(radicand(self.prob, w))
        return 1.0 / math.sqrt(rad) if rad > 0 else 0.0

    def __call__(self, v: float) -> float:
        a, b = self.v0, v
        wt = self.wt
        if wt is not None and min(a, b) <= wt <= max(a, b) and not (a == wt or b == wt):
            raise TurningPointError("integration path crosses the turning point")
        if wt is not None and (wt - a) * (wt - b) >= 0 and abs(b - a) > 0:
            # both ends on the same side of wt: w = wt - side t^2
            side = 1.0 if a <= wt else -1.0
            ta, tb = math.sqrt(abs(wt - a)), math.sqrt(abs(wt - b))

            def g(t):
                w = wt - side * t * t
                rad = float(radicand(self.prob, w))
                if t == 0.0 or rad <= 0:
                    # limit 2 t / sqrt(R) as t -> 0 with R ~ |R'(wt)| t^2
                    slope = abs(self._slope(wt))
                    return 2.0 / math.sqrt(slope) if slope > 0 else 0.0
                return 2.0 * t / math.sqrt(rad)

            # dw = -side 2t dt
            return -side * adaptive_simpson(g, ta, tb, self.tol)
        return adaptive_simpson(self._inv, a, b, self.tol)

    def _slope(self, w):
        mu, k = float(self.prob.mu), self.prob.k
        e = self.prob.exponent
        return self.prob.metric_sign * (1 - mu) ** 2 * (-self.prob.lam / k) * e * w ** (e - 1)


def solve_quadrature(prob: EinsteinProblem, v0: float, r_domain: Sequence[float], branch=1,
                     n: int = 201, tol: float = 1e-10, v_cap: float = 1e12) -> EinsteinSolution:
    """v(r) from r - r0 = branch * int_{v0}^{v} dw/sqrt(R(w)), truncated at a turning point."""
    if prob.k < 2:
        raise ValueError("the quadrature route needs k >= 2")
    prob.check_mu()
    branch = _sign(branch)
    r0, r1 = float(r_domain[0]), float(r_domain[1])
    if not r1 > r0:
        raise ValueError("r_domain must be increasing")
    if not v0 > 0:
        raise ValueError("v0 must be positive")
    if not float(radicand(prob, v0)) > 0:
        raise TurningPointError(f"radicand is non-positive at v0 = {v0}")
    F = _Integral(prob, v0, tol)
    wt = F.wt
    # v moves monotonically; its direction is branch (v' = branch sqrt(R))
    if branch > 0:
        far = wt if (wt is not None and wt > v0) else v_cap
    else:
        far = wt if (wt is not None and wt < v0) else 0.0
    if far == v_cap:
        # unbounded growth: widen the bracket only as far as the r-range needs
        hi = v0
        while hi < v_cap:
            hi = min(v_cap, 2.0 * hi + 1.0)
            if abs(F(hi)) >= r1 - r0:
                break
        far = hi
    reach = abs(F(far))
    stop = r0 + reach
    turning = ()
    if far == wt:
        turning = (stop,) if stop <= r1 else ()
    r_end = min(r1, stop)
    r = np.linspace(r0, r_end, n)
    v = np.empty(n)
    for i, ri in enumerate(r):
        target = ri - r0
        if target == 0:
            v[i] = v0
        elif target >= reach:
            v[i] = far
        else:
            lo, hi = (v0, far) if branch > 0 else (far, v0)
            v[i] = brentq(lambda x: abs(F(x)) - target, lo, hi, xtol=1e-14, rtol=1e-15)
    resid = max(abs(abs(F(vi)) - (ri - r0)) for ri, vi in zip(r, v))
    dom = _positive_intervals(r, v)
    return EinsteinSolution("first-integral-quadrature", r, v, prob.metric_sign, branch,
                            {"v0": v0, "r0": r0}, dom, turning, resid)


def _positive_intervals(r: np.ndarray, v: np.ndarray, fn: Callable | None = None) -> tuple:
    """Maximal intervals of r where the profile is positive; roots refined by bisection when fn is given."""
    out = []
    pos = v > 0
    start = None
    for i, p in enumerate(pos):
        if p and start is None:
            start = r[i] if i == 0 else _root(fn, r[i - 1], r[i], v[i - 1], v[i])
        if not p and start is not None:
            out.append((float(start), float(_root(fn, r[i - 1], r[i], v[i - 1], v[i]))))
            start = None
    if start is not None:
        out.append((float(start), float(r[-1])))
    return tuple(out)


def _root(fn, a, b, fa, fb):
    if fn is None:
        return a + (b - a) * fa / (fa - fb) if fa != fb else a
    if fa == 0:
        return a
    if fb == 0:
        return b
    return brentq(fn, a, b, xtol=1e-12)


# ---------------------------------------------------------------------------
# closed forms

def closed_form_mu_minus1(k: int, nu: float, lam: float, gamma: float = 0.0, metric_sign=1,
                          r_domain: Sequence[float] = (-5.0, 5.0), n: int = 401) -> EinsteinSolution:
    """v(r) = -eps (lam/k)(r+gamma)^2 + (nu/lam) k/(k-1) at mu = -1."""
    if k < 2:
        raise ValueError("the closed form needs k >= 2")
    if lam == 0:
        raise ValueError("lam = 0: use solve_quadrature (the profile is linear)")
    eps = _sign(metric_sign)
    a = -eps * lam / k
    c = nu / lam * k / (k - 1)

    def fn(x):
        return a * (np.asarray(x) + gamma) ** 2 + c

    r = np.linspace(float(r_domain[0]), float(r_domain[1]), n)
    v = fn(r)
    dom = _positive_intervals(r, v, fn)
    prob = EinsteinProblem(k, nu, lam, eps, -1.0)
    dv = 2 * a * (r + gamma)
    resid = geo.pairwise_max(np.abs(first_integral(prob, v, dv) - nu))
    return EinsteinSolution("closed-form-mu-minus-1", r, v, eps, None,
                            {"gamma": gamma, "a": a, "c": c}, dom, (), resid, fn)


def k1_profile(lam, r, metric_sign=1, a: float = 0.0, b: float = 1.0) -> EinsteinSolution:
    """k = 1, mu = -1: v'' = -2 eps lam, so v = -2 eps int int lam + a r + b."""
    eps = _sign(metric_sign)
    r = np.asarray(r, dtype=float)
    lam_vals = np.asarray(lam(r) if callable(lam) else np.broadcast_to(lam, r.shape), dtype=float)
    inner = cumulative_trapezoid(lam_vals, r, initial=0.0)
    outer = cumulative_trapezoid(inner, r, initial=0.0)
    v = -2 * eps * outer + a * (r - r[0]) + b
    if not np.any(v > 0):
        raise ValueError("the profile is non-positive on the whole domain")
    h = r[1] - r[0]
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
    resid = geo.pairwise_max(np.abs(d2 + 2 * eps * lam_vals[1:-1]))
    return EinsteinSolution("k1-double-integral", r, v, eps, None, {"a": a, "b": b},
                            _positive_intervals(r, v), (), resid)


def trace_compat(m: int, k: int):
    """Roots of (m-1)(m-2) mu^2 + 2(m-1)k mu + k(k-1) = 0 (one root when m = 2)."""
    if m < 2 or k < 2:
        raise ValueError("need m >= 2 and k >= 2")
    if m == 2:
        return Fraction(1 - k, 2)
    a = (m - 1) * (m - 2)
    root = sympy.sqrt(sympy.Integer((m - 1) * k * (k + m - 2)))
    lo = sympy.nsimplify((-(m - 1) * k - root) / a)
    hi = sympy.nsimplify((-(m - 1) * k + root) / a)
    return lo, hi


# ---------------------------------------------------------------------------
# two-dimensional base: Euler equation

def _exps(k: int):
    return Fraction(k + 2, k), Fraction(k - 2, k)


def schwarzschild_general(k: int, lam, nu, C):
    """Coefficients {exponent: coefficient} of u^2 as a sum of powers of r."""
    if k < 2:
        raise ValueError("need k >= 2")
    a1, a2 = _exps(k)
    lam, nu, C = (Fraction(x) if isinstance(x, (int, Fraction)) else x for x in (lam, nu, C))
    terms = {}

    def add(e, c):
        terms[e] = terms.get(e, 0) + c

    add(a1, lam / (1 - a1 * a1))
    add(a2, nu / (1 - a2 * a2))
    add(Fraction(-1), C)
    return {e: c for e, c in terms.items() if c != 0}


def euler_operator(terms: dict) -> dict:
    """r^3 S_B applied to sum c r^a with S_B f = f/r^3 - f'/r^2 - f''/r: maps c r^a to (1-a^2) c r^a."""
    out = {}
    for a, c in terms.items():
        val = (1 - a * a) * c
        if val != 0:
            out[a] = out.get(a, 0) + val
    return {a: c for a, c in out.items() if c != 0}


def first_order_operator(terms: dict) -> dict:
    """L f = 2 (f/r + f'): maps c r^a to 2 (1 + a) c r^(a-1)."""
    out = {}
    for a, c in terms.items():
        val = 2 * (1 + a) * c
        if val != 0:
            out[a - 1] = out.get(a - 1, 0) + val
    return {a: c for a, c in out.items() if c != 0}


def power_law_residuals(k: int, lam, nu, terms: dict) -> tuple[dict, dict]:
    """Exact residuals (as power-law dictionaries) of the Euler equation and the first-order form.

    Euler:       r^3 S_B u^2 - lam r^(1+2/k) - nu r^(1-2/k)
    first order: -(1/k) L u^2 - lam r^(2/k) + nu r^(-2/k)
    """
    a1, a2 = _exps(k)
    euler = euler_operator(terms)
    for e, c in ((a1, -lam), (a2, -nu)):
        euler[e] = euler.get(e, 0) + c
    first = {e: -c / k for e, c in first_order_operator(terms).items()}
    for e, c in ((Fraction(2, k), -lam), (Fraction(-2, k), nu)):
        first[e] = first.get(e, 0) + c
    return ({e: c for e, c in euler.items() if c != 0}, {e: c for e, c in first.items() if c != 0})


def _eval_terms(terms: dict, r):
    r = np.asarray(r, dtype=float)
    return sum((float(c) * r ** float(e) for e, c in terms.items()), start=np.zeros_like(r))


def schwarzschild_profile(k: int, lam, nu, C, r_domain=(0.5, 10.0), n: int = 401) -> EinsteinSolution:
    """Sampled u^2 with the numerical Euler residual from analytic derivatives."""
    terms = schwarzschild_general(k, lam, nu, C)
    r = np.linspace(float(r_domain[0]), float(r_domain[1]), n)
    u2 = _eval_terms(terms, r)
    d1 = {e - 1: e * c for e, c in terms.items() if e != 0}
    d2 = {e - 1: e * c for e, c in d1.items() if e != 0}
    lhs = u2 - r * _eval_terms(d1, r) - r ** 2 * _eval_terms(d2, r)
    a1, a2 = _exps(k)
    rhs = float(lam) * r ** float(a1) + float(nu) * r ** float(a2)
    scale = max(1.0, geo.pairwise_max(np.abs(rhs)))
    resid = geo.pairwise_max(np.abs(lhs - rhs)) / scale

    def fn(x):
        return _eval_terms(terms, x)

    return EinsteinSolution("schwarzschild-general", r, u2, 0, None,
                            {"k": k, "lam": lam, "nu": nu, "C": C, "terms": terms},
                            _positive_intervals(r, u2, fn), (), resid, fn)


@dataclass(frozen=True)
class SpuriousReport:
    accepted: bool
    residual: dict


def spurious_filter(k: int, lam, nu, r_coeff=0, inv_coeff=0) -> SpuriousReport:
    """Accept the homogeneous part a r + C/r only when a = 0; report the first-order residual."""
    terms = schwarzschild_general(k, lam, nu, inv_coeff)
    if r_coeff:
        terms[Fraction(1)] = terms.get(Fraction(1), 0) + r_coeff
    euler, first = power_law_residuals(k, lam, nu, terms)
    if euler:
        raise ValueError("homogeneous part does not solve the Euler equation")
    return SpuriousReport(not first, first)


# ---------------------------------------------------------------------------
# nested (psi, mu) construction of the Schwarzschild-type metric

def _fiber_metric(grid: ChartGrid, k: int, nu: float) -> MetricField:
    """Einstein fiber with constant nu: round sphere of radius sqrt((k-1)/nu) or flat for nu = 0."""
    if nu == 0:
        return MetricField.diagonal(grid, [1.0] * k)
    if nu < 0:
        raise ValueError("nested check supports nu >= 0")
    rad2 = (k - 1) / nu
    entries = []
    for i in range(k):
        def e(*x, i=i):
            out = np.full(np.shape(x[0]), rad2)
            for j in range(i):
                out = out * np.sin(x[j]) ** 2
            return out
        entries.append(e)
    return MetricField.diagonal(grid, entries)


@dataclass(frozen=True, eq=False)
class NestedReport:
    metric_gap: float
    ricci: tuple[tuple[float, float], ...]
    functional: tuple[tuple[float, float], ...]
    fiber_coefficient_gap: float

    @property
    def max_ricci(self) -> float:
        return max(v for _, v in self.ricci)

    @property
    def max_functional(self) -> float:
        return max(v for _, v in self.functional)


def nested_metric(k: int, u2: Callable, grid_s: Axis, grid_y: Axis, fiber_grid: ChartGrid, nu: float,
                  time_sign: int = -1) -> tuple[MetricField, MetricField, BcwpSpec]:
    """Two nested bcwp assemblies; returns (4D metric, direct change-of-variables metric, outer spec)."""
    time_sign = _sign(time_sign)
    line_s = ChartGrid((grid_s,))
    line_y = ChartGrid((grid_y,))

    def psi1(s):
        return 2 * s ** 0.25 * np.sqrt(u2(np.sqrt(s)))

    s = line_s.axes[0].coords
    if not np.all(u2(np.sqrt(s)) > 0):
        raise ValueError("u^2 must be positive on the sampled range")
    inner = BcwpSpec(MetricField.diagonal(line_s, [1.0]),
                     MetricField.diagonal(line_y, [float(time_sign)]),
                     line_s.sample(lambda x: 1.0 / psi1(x)), line_s.sample(psi1))
    gB = assemble(inner)
    mu2 = Fraction(1 - k, 2)
    outer = BcwpSpec(gB, _fiber_metric(fiber_grid, k, nu),
                     gB.grid.sample(lambda x, y: x ** (float(mu2) / k)),
                     gB.grid.sample(lambda x, y: x ** (1.0 / k)))
    g = assemble(outer)
    grid = outer.grid
    mesh = grid.mesh()
    sv = mesh[0]
    r = np.sqrt(sv)
    direct = np.zeros(grid.shape + (k + 2, k + 2))
    pref = sv ** (1.0 / k - 1)
    direct[..., 0, 0] = pref / (4 * np.sqrt(sv) * u2(r))
    direct[..., 1, 1] = pref * time_sign * 4 * np.sqrt(sv) * u2(r)
    fib = lift_fiber(outer, outer.fiber.components)
    direct[..., 2:, 2:] = sv[..., None, None] ** (2.0 / k) * fib
    return g, MetricField(grid, direct), outer


def nested_bcwp_check(M: float = 1.0, k: int = 2, lam: float = 0.0, nu: float = 1.0, time_sign: int = -1,
                      radii: Sequence[float] = (3.0, 3.5, 4.0, 4.5, 5.0), h: float = 1e-2,
                      count: int = 9, order: int = 2) -> NestedReport:
    """Assemble the nested metric around each radius and measure max |Ric - lam g| with the FD oracle."""
    terms = schwarzschild_general(k, Fraction(lam).limit_denominator() if isinstance(lam, float) else lam,
                                  nu, -2 * M)

    def u2(x):
        return _eval_terms(terms, x)

    ricci_out, func_out, gaps, fgap = [], [], [], 0.0
    for rr in radii:
        s0 = rr * rr
        ax_s = Axis("s", s0 - h * (count - 1) / 2, h, count)
        ax_y = Axis("y", -h * (count - 1) / 2, h, count)
        names = [f"x{i}" for i in range(k)]
        fiber_grid = ChartGrid.centered(names, [1.2] * k, h, count)
        g, direct, outer = nested_metric(k, u2, ax_s, ax_y, fiber_grid, nu, time_sign)
        gaps.append(float(np.max(np.abs(g.components - direct.components))))
        fgap = max(fgap, float(np.max(np.abs(outer.w.values ** 2 - outer.base.grid.mesh()[0] ** (2.0 / k)))))
        ric = geo.ricci(g, order)
        diff = ric.components - lam * g.components
        mask = ric.mask & g.grid.interior(2 * geo.stencil_radius(order))
        ricci_out.append((rr, float(np.max(np.abs(diff[mask])))))
        # lam psi^(1-k) + nu psi^(-(k+1)) = S_B with psi = s^(1/k)
        SB = geo.scalar_curvature(outer.base, order)
        sv = outer.base.grid.mesh()[0]
        psi = sv ** (1.0 / k)
        lhs = lam * psi ** (1 - k) + nu * psi ** (-(k + 1))
        bm = SB.mask & outer.base.grid.interior(2 * geo.stencil_radius(order))
        func_out.append((rr, float(np.max(np.abs(lhs - SB.values)[bm]))))
    return NestedReport(max(gaps), tuple(ricci_out), tuple(func_out), fgap)


# ---------------------------------------------------------------------------
# integrated identity on closed bases

def laplacian_integral(g: MetricField, f: ScalarField, order: int = 2) -> tuple[float, float]:
    """(int Lap f dV, int |Lap f| dV) over a fully periodic grid; the first vanishes on closed manifolds.

    The divergence form makes the discrete integral telescope exactly.
    """
    if not all(a.periodic for a in g.grid.axes):
        raise ValueError("integrated identity needs a fully periodic grid")
    lap = geo.laplace_beltrami(g, f, order, form="divergence")
    vol = np.sqrt(np.abs(g.det())) * float(np.prod(g.grid.spacings))
    return math.fsum(np.ravel(lap.values * vol)), math.fsum(np.ravel(np.abs(lap.values) * vol))


def trace_power(m: int, k: int, mu) -> float:
    """1/alpha_tr, the power of psi in the trace relation."""
    cs = coefficients(SbcwpParams(m, k, mu))
    if not cs.trace_valid:
        raise ValueError("trace coefficients vanish at this mu")
    return float(1 / cs.alpha_tr)
