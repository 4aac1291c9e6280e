"""One-function specialization c = psi**mu, w = psi of the base conformal warped product.

Coefficient algebra works on any field-like number type: ``int``/``Fraction``
give exact results, ``float`` gives floating results, and sympy expressions are
accepted for irrational parameter values such as the roots of eta^H.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np
import sympy

from . import geometry as geo
from .bcwp import BcwpSpec, assemble, lift_base, lift_fiber
from .geometry import MetricField, ScalarField, TensorField

__all__ = [
    "SbcwpParams",
    "CoefficientSet",
    "ExceptionalValue",
    "ExceptionalSet",
    "NearExceptionalWarning",
    "coefficients",
    "exceptional_mus",
    "scalar_branch",
    "sbcwp_spec",
    "ricci_residual",
    "scalar_residual",
    "RicciResidual",
    "ScalarResidual",
    "parse_number",
]

TOL_NEAR = 1e-9


class NearExceptionalWarning(UserWarning):
    """mu is within floating tolerance of an exceptional value."""


def parse_number(text):
    """'3', '-1/2', '0.3' -> Fraction for rationals written exactly, float otherwise."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, float):
        return text
    s = str(text).strip()
    try:
        return Fraction(s)
    except ValueError:
        return float(s)


@dataclass(frozen=True)
class SbcwpParams:
    m: int
    k: int
    mu: object

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be an integer >= 1")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be an integer >= 0")
        mu = self.mu
        if isinstance(mu, int) and not isinstance(mu, bool):
            mu = Fraction(mu)
        object.__setattr__(self, "mu", mu)

    @property
    def exact(self) -> bool:
        return isinstance(self.mu, (Rational, sympy.Basic))


# coefficient polynomials a2 mu^2 + a1 mu + a0 with integer coefficients

def _polys(m: int, k: int) -> dict[str, tuple[int, int, int]]:
    return {
        "zeta": (0, 2 * (m - 1), 2 * k),
        "eta": ((m - 1) * (m - 2), 2 * (m - 2) * k, k * (k + 1)),
        "zetaH": (0, -(m - 2), -k),
        "etaH": (m - 2, 2 * k, -k),
        "zetaD": (0, 1, 0),
        "etaD": (m - 2, k, 0),
        "zeta_tr": (0, -2 * (m - 1), -k),
        "eta_tr": (-(m - 1) * (m - 2), -(m - 2) * k, -k),
    }


def _evaluate(poly, mu):
    a2, a1, a0 = poly
    return a2 * mu * mu + a1 * mu + a0


def _real_roots(poly) -> list[float]:
    a2, a1, a0 = poly
    if a2 == 0:
        return [] if a1 == 0 else [-a0 / a1]
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        return []
    r = math.sqrt(disc)
    return [(-a1 - r) / (2 * a2), (-a1 + r) / (2 * a2)]


def _vanishes(poly, mu, value) -> bool:
    if isinstance(mu, sympy.Basic):
        return sympy.simplify(value) == 0
    if isinstance(mu, Rational):
        return value == 0
    if all(c == 0 for c in poly):
        return True
    near = [r for r in _real_roots(poly) if abs(float(mu) - r) < TOL_NEAR]
    if near and value != 0:
        warnings.warn(f"mu={mu!r} lies within {TOL_NEAR:g} of an exceptional value {near[0]!r}",
                      NearExceptionalWarning, stacklevel=3)
    return bool(near) or value == 0


def _simplify(x):
    return sympy.nsimplify(sympy.simplify(x)) if isinstance(x, sympy.Basic) else x


@dataclass(frozen=True)
class CoefficientSet:
    params: SbcwpParams
    zeta: object
    eta: object
    alpha: object
    beta: object
    zetaH: object
    etaH: object
    zetaD: object
    etaD: object
    alphaH: object
    betaH: object
    alphaD: object
    betaD: object
    zeta_tr: object
    eta_tr: object
    alpha_tr: object
    beta_tr: object
    scalar_valid: bool
    hessian_valid: bool
    laplacian_valid: bool
    trace_valid: bool
    notes: tuple[str, ...] = field(default=())

    @property
    def ricci_valid(self) -> bool:
        return self.hessian_valid and self.laplacian_valid

    def items(self):
        for name in ("zeta", "eta", "alpha", "beta", "zetaH", "etaH", "alphaH", "betaH",
                     "zetaD", "etaD", "alphaD", "betaD", "zeta_tr", "eta_tr", "alpha_tr", "beta_tr"):
            yield name, getattr(self, name)


_KNOWN_NOTES = {
    (6, 5, Fraction(-1, 2)): (
        "beta = zeta^2/eta = 25/15 = 5/3 (zeta=5, eta=15); a value of 10/3 sometimes quoted "
        "for this case does not follow from these coefficients",
    ),
}


def _pair(zeta, eta, valid):
    if not valid:
        return None, None
    return _simplify(zeta / eta), _simplify(zeta * zeta / eta)


def coefficients(p: SbcwpParams) -> CoefficientSet:
    """Every (zeta, eta, alpha, beta) pair of the scalar, Ricci and trace relations."""
    m, k, mu = p.m, p.k, p.mu
    polys = _polys(m, k)
    vals = {name: _simplify(_evaluate(poly, mu)) for name, poly in polys.items()}
    zero = {name: _vanishes(polys[name], mu, vals[name]) for name in polys}

    def ok(a, b):
        return not (zero[a] or zero[b])

    scalar_ok, h_ok, d_ok, tr_ok = ok("zeta", "eta"), ok("zetaH", "etaH"), ok("zetaD", "etaD"), \
        ok("zeta_tr", "eta_tr")
    alpha, beta = _pair(vals["zeta"], vals["eta"], scalar_ok)
    alphaH, betaH = _pair(vals["zetaH"], vals["etaH"], h_ok)
    alphaD, betaD = _pair(vals["zetaD"], vals["etaD"], d_ok)
    alpha_tr, beta_tr = _pair(vals["zeta_tr"], vals["eta_tr"], tr_ok)
    notes = ()
    if isinstance(mu, Rational):
        notes = _KNOWN_NOTES.get((m, k, Fraction(mu)), ())
    return CoefficientSet(p, vals["zeta"], vals["eta"], alpha, beta,
                          vals["zetaH"], vals["etaH"], vals["zetaD"], vals["etaD"],
                          alphaH, betaH, alphaD, betaD,
                          vals["zeta_tr"], vals["eta_tr"], alpha_tr, beta_tr,
                          scalar_ok, h_ok, d_ok, tr_ok, notes)


# ---------------------------------------------------------------------------
# exceptional values

@dataclass(frozen=True)
class ExceptionalValue:
    label: str
    value: object            # int/Fraction or sympy expression
    relation: str            # "ricci", "scalar"
    vanishing: tuple[str, ...]

    @property
    def approx(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class ExceptionalSet:
    m: int
    k: int
    values: tuple[ExceptionalValue, ...]

    def ricci(self):
        return [e for e in self.values if e.relation == "ricci"]

    def scalar(self):
        return [e for e in self.values if e.relation == "scalar"]

    def get(self, label: str) -> ExceptionalValue:
        for e in self.values:
            if e.label == label:
                return e
        raise KeyError(label)

    @property
    def mu_bar(self):
        try:
            return self.get("mu_bar").value
        except KeyError:
            return None

    @property
    def mu_bar_pm(self):
        try:
            return self.get("mu_bar_minus").value, self.get("mu_bar_plus").value
        except KeyError:
            return None


def _exact(x):
    x = sympy.nsimplify(x)
    return Fraction(int(x.p), int(x.q)) if x.is_Rational else x


def _vanishing(m, k, value) -> tuple[str, ...]:
    polys = _polys(m, k)
    return tuple(name for name, poly in polys.items()
                 if sympy.simplify(_evaluate(poly, sympy.sympify(value))) == 0)


def exceptional_mus(m: int, k: int) -> ExceptionalSet:
    """Parameter values where the reduced Ricci or scalar relations are unavailable.

    0 and 1 appear for every dimension: the power-rule derivation of the Ricci
    relation divides by mu(mu - 1).  The remaining values are zeros of a
    zeta/eta coefficient, recorded in ``vanishing``.
    """
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    out = []

    def add(label, value, relation):
        value = _exact(value)
        out.append(ExceptionalValue(label, value, relation, _vanishing(m, k, value)))

    add("zero", 0, "ricci")
    add("one", 1, "ricci")
    if m >= 3:
        mb = sympy.Rational(-k, m - 2)
        add("mu_bar", mb, "ricci")
        root = sympy.sqrt(mb * mb - mb)
        add("mu_bar_minus", mb - root, "ricci")
        add("mu_bar_plus", mb + root, "ricci")
    elif m == 1:
        add("mu_bar", k, "ricci")
        root = sympy.sqrt(sympy.Integer(k * k - k))
        add("mu_bar_minus", k - root, "ricci")
        add("mu_bar_plus", k + root, "ricci")
    else:
        add("half", sympy.Rational(1, 2), "ricci")
    if m >= 2:
        add("scalar", sympy.Rational(-k, m - 1), "scalar")
    else:
        add("scalar", sympy.Rational(k + 1, 2), "scalar")
    return ExceptionalSet(m, k, tuple(out))


def scalar_branch(p: SbcwpParams) -> str:
    """Name of the scalar-curvature relation that applies at (m, k, mu)."""
    cs = coefficients(p)
    if cs.scalar_valid:
        return "reduced"
    m, k, mu = p.m, p.k, p.mu
    zeta_zero = _vanishes(_polys(m, k)["zeta"], mu, cs.zeta)
    if m == 1 and k == 1 and mu == 1:
        return "m1-k1-mu1"
    if m >= 2 and zeta_zero and not _vanishes(_polys(m, k)["eta"], mu, cs.eta):
        return "zeta-zero"
    if m == 1 and not zeta_zero:
        return "eta-zero"
    return "zeta-eta"


# ---------------------------------------------------------------------------
# field residuals

def sbcwp_spec(base: MetricField, fiber: MetricField, psi: ScalarField, mu: float) -> BcwpSpec:
    if not psi.positive():
        raise ValueError("psi must be strictly positive")
    return BcwpSpec(base, fiber, psi ** float(mu), psi)


def _grad_sq(g: MetricField, f: ScalarField, order: int) -> np.ndarray:
    grad = geo.gradient(g, f, order).components
    df = geo.differential(f, order).components
    return np.einsum("...i,...i->...", grad, df)


@dataclass(frozen=True, eq=False)
class RicciResidual:
    unreduced: TensorField          # formula minus oracle, full product tensor
    reduced: TensorField | None
    forms_gap: float                # max |unreduced formula - reduced formula|
    order: int

    def max_unreduced(self) -> float:
        return geo.max_discrepancy(self.unreduced, _zero_like(self.unreduced), order=self.order)

    def max_reduced(self) -> float | None:
        if self.reduced is None:
            return None
        return geo.max_discrepancy(self.reduced, _zero_like(self.reduced), order=self.order)


def _zero_like(t: TensorField) -> TensorField:
    return TensorField(t.grid, np.zeros_like(t.components), t.variance, t.mask)


def ricci_residual(base: MetricField, fiber: MetricField, psi: ScalarField, p: SbcwpParams,
                   nu: float | None = None, order: int = 2) -> RicciResidual:
    """Unreduced and (when available) reduced Ricci relations against the assembled metric.

    Unreduced base block:
      Ric_B - [(m-2) H^{psi^mu}/psi^mu + k H^psi/psi] + 2mu[(m-2)mu+k] dpsi dpsi/psi^2
      - [((m-3)mu^2 + k mu)|grad psi|^2/psi^2 + Lap psi^mu/psi^mu] g_B
    Unreduced fiber block:
      Ric_F - psi^{-2(mu-1)} [((m-2)mu+k-1)|grad psi|^2/psi^2 + Lap psi/psi] g_F
    Reduced blocks use beta^H H^{psi^{1/alpha^H}} and beta^D Lap psi^{1/alpha^D}.
    ``nu`` replaces the fiber Ricci tensor by nu g_F when given.
    """
    m, k, mu = p.m, p.k, float(p.mu)
    spec = sbcwp_spec(base, fiber, psi, mu)
    g = assemble(spec)
    oracle = geo.ricci(g, order)
    x = psi.values
    xm = x[..., None, None]
    gB, gF = base.components, fiber.components
    G = geo.christoffel(base, order)
    H = lambda f: geo.hessian(base, f, order, G).components  # noqa: E731
    lap = lambda f: geo.laplace_beltrami(base, f, order, gamma=G).values  # noqa: E731
    dpsi = geo.differential(psi, order).components
    gsq = _grad_sq(base, psi, order)
    ric_b = geo.ricci(base, order).components
    ric_f = nu * gF if nu is not None else geo.ricci(fiber, order).components
    psimu = psi ** mu
    bb = (ric_b - ((m - 2) * H(psimu) / psimu.values[..., None, None] + k * H(psi) / xm)
          + 2 * mu * ((m - 2) * mu + k) * np.einsum("...a,...b->...ab", dpsi, dpsi) / xm ** 2
          - (((m - 3) * mu ** 2 + k * mu) * gsq / x ** 2 + lap(psimu) / psimu.values)[..., None, None] * gB)
    fcoef = x ** (-2 * (mu - 1)) * (((m - 2) * mu + k - 1) * gsq / x ** 2 + lap(psi) / x)

    def assemble_blocks(bb, fcoef):
        n = m + k
        full = np.zeros(spec.shape + (n, n))
        full[..., :m, :m] = lift_base(spec, bb)
        full[..., m:, m:] = (lift_fiber(spec, ric_f, full=False)
                             - lift_base(spec, fcoef, full=False)[..., None, None]
                             * lift_fiber(spec, gF, full=False))
        return full

    mask = oracle.mask
    unreduced_formula = assemble_blocks(bb, fcoef)
    unreduced = TensorField(spec.grid, unreduced_formula - oracle.components, "dd", mask)
    cs = coefficients(SbcwpParams(m, k, p.mu))
    reduced = None
    gap = float("nan")
    if cs.ricci_valid and mu != 0:
        aH, bH = float(cs.alphaH), float(cs.betaH)
        aD, bD = float(cs.alphaD), float(cs.betaD)
        tH, tD = 1 / aH, 1 / aD
        lapD = lap(psi ** tD) / x ** tD
        bb_r = ric_b + bH * H(psi ** tH) / xm ** tH - (bD * lapD)[..., None, None] * gB
        fcoef_r = x ** (-2 * (mu - 1)) * (bD / mu) * lapD
        reduced_formula = assemble_blocks(bb_r, fcoef_r)
        reduced = TensorField(spec.grid, reduced_formula - oracle.components, "dd", mask)
        interior = mask & spec.grid.interior(2 * geo.stencil_radius(order))
        gap = float(np.max(np.abs(reduced_formula - unreduced_formula)[interior]))
    return RicciResidual(unreduced, reduced, gap, order)


@dataclass(frozen=True, eq=False)
class ScalarResidual:
    branch: str
    psi_form: ScalarField          # psi^{2mu} S - S_B - S_F psi^{2(mu-1)} + (eta-zeta)|grad psi|^2/psi^2 + zeta Lap psi/psi
    u_form: ScalarField | None     # -beta Lap u + S_B u - S u^p + S_F u^q   (u = psi^{1/alpha})
    scale: float                   # magnitude of the largest term, for relative residuals
    order: int
    u_scale: float = 0.0

    def max_abs(self, which: str = "psi") -> float:
        f = self.psi_form if which == "psi" else self.u_form
        margin = 2 * geo.stencil_radius(self.order)
        mask = f.mask & f.grid.interior(margin)
        return float(np.max(np.abs(f.values[mask])))

    def relative(self, which: str = "psi") -> float:
        scale = self.scale if which == "psi" else self.u_scale
        return self.max_abs(which) / scale if scale > 0 else self.max_abs(which)


def _as_base_array(S, base: MetricField) -> np.ndarray:
    if isinstance(S, ScalarField):
        return S.values
    return np.broadcast_to(np.asarray(S, dtype=float), base.grid.shape)


def scalar_residual(base: MetricField, S_F, psi: ScalarField, p: SbcwpParams, S,
                    order: int = 2, branch: str | None = None) -> ScalarResidual:
    """Residual of the scalar-curvature relation of the one-function product.

    ``S`` is the scalar curvature of the product restricted to the base (constant
    or base field).  ``S_F`` must be constant for the reduced u-equation; a fiber
    field is accepted only if it is constant along the fiber.
    """
    if not psi.positive():
        raise ValueError("psi must be strictly positive")
    branch = branch or scalar_branch(p)
    if isinstance(S_F, ScalarField):
        vals = S_F.values
        if branch == "reduced" and np.ptp(vals) > 1e-9 * max(1.0, np.max(np.abs(vals))):
            raise ValueError("the reduced relation needs a constant fiber scalar curvature")
        S_F = float(np.mean(vals))
    m, k, mu = p.m, p.k, float(p.mu)
    cs = coefficients(p)
    zeta, eta = float(cs.zeta), float(cs.eta)
    S = _as_base_array(S, base)
    x = psi.values
    SB_field = geo.scalar_curvature(base, order)
    SB = SB_field.values
    gsq = _grad_sq(base, psi, order)
    lap = geo.laplace_beltrami(base, psi, order)
    mask = lap.mask & SB_field.mask
    lhs = x ** (2 * mu) * S
    terms = [lhs, SB, S_F * x ** (2 * (mu - 1)), (eta - zeta) * gsq / x ** 2, zeta * lap.values / x]
    psi_vals = terms[0] - terms[1] - terms[2] + terms[3] + terms[4]
    scale = max(float(np.max(np.abs(t[mask]))) for t in terms)
    psi_form = ScalarField(base.grid, geo._zero_outside(psi_vals, mask), mask)
    u_form = None
    u_scale = 0.0
    if branch == "reduced":
        alpha, beta = float(cs.alpha), float(cs.beta)
        u = psi ** (1 / alpha)
        lap_u = geo.laplace_beltrami(base, u, order)
        pexp = 2 * mu * alpha + 1
        qexp = 2 * (mu - 1) * alpha + 1
        uv = u.values
        u_terms = [beta * lap_u.values, SB * uv, S * uv ** pexp, S_F * uv ** qexp]
        u_vals = -u_terms[0] + u_terms[1] - u_terms[2] + u_terms[3]
        umask = lap_u.mask & mask
        u_form = ScalarField(base.grid, geo._zero_outside(u_vals, umask), umask)
        u_scale = max(float(np.max(np.abs(t[umask]))) for t in u_terms)
    return ScalarResidual(branch, psi_form, u_form, scale, order, u_scale)
