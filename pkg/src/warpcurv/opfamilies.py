"""Weighted sums of logarithmic Laplacians and Hessians of powers.

An operator family is a list of terms (r_i, a_i) acting on positive functions by

    L v = sum_i r_i * Lap(v**a_i) / v**a_i.

With zeta = sum r_i a_i and eta = sum r_i a_i**2 the power rule collapses it to

    L v = (eta - zeta) |grad v|^2 / v^2 + zeta Lap v / v,

and, when zeta and eta are both nonzero, to beta * Lap(v**(1/alpha)) / v**(1/alpha)
with alpha = zeta/eta and beta = zeta**2/eta.  The same algebra holds with the
Hessian in place of the Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import (
    MetricField,
    ScalarField,
    TensorField,
    _first_derivs,
    _zero_outside,
    differential,
    gradient,
    hessian,
    laplace_beltrami,
    scalar_curvature,
)

__all__ = [
    "OpFamily",
    "ReducedForm",
    "LEvaluation",
    "reduce",
    "eval_L",
    "eval_H_family",
    "lap_power",
    "conformal_laplacian_identity",
    "conformal_scalar_identity",
    "lelong_ferrand",
]


def _is_zero(x) -> bool:
    try:
        return bool(x == 0)
    except TypeError:
        return False


@dataclass(frozen=True)
class OpFamily:
    terms: tuple[tuple[object, object], ...]

    def __post_init__(self):
        terms = tuple((r, a) for r, a in self.terms)
        if not terms:
            raise ValueError("an operator family needs at least one term")
        object.__setattr__(self, "terms", terms)

    @property
    def zeta(self):
        return sum((r * a for r, a in self.terms), start=0 * self.terms[0][0])

    @property
    def eta(self):
        return sum((r * a * a for r, a in self.terms), start=0 * self.terms[0][0])


@dataclass(frozen=True)
class ReducedForm:
    alpha: object
    beta: object
    valid: bool


def reduce(family: OpFamily) -> ReducedForm:
    """alpha = zeta/eta, beta = zeta^2/eta; invalid (not an error) when either vanishes."""
    zeta, eta = family.zeta, family.eta
    if _is_zero(zeta) or _is_zero(eta):
        return ReducedForm(None, None, False)
    if isinstance(zeta, int) and isinstance(eta, int):
        zeta, eta = Fraction(zeta), Fraction(eta)
    return ReducedForm(zeta / eta, zeta * zeta / eta, True)


def lelong_ferrand(n: int) -> OpFamily:
    """The two-term family r = (1/(n-1), -1/(n+2)), a = (n-1, n)."""
    return OpFamily(((Fraction(1, n - 1), n - 1), (Fraction(-1, n + 2), n)))


def _require_positive(v: ScalarField, name: str = "v"):
    if not v.positive():
        raise ValueError(f"{name} must be strictly positive on the grid")


@dataclass(frozen=True)
class LEvaluation:
    literal: ScalarField
    closed: ScalarField
    reduced: ScalarField | None

    @property
    def mask(self):
        return self.literal.mask & self.closed.mask


def eval_L(family: OpFamily, g: MetricField, v: ScalarField, order: int = 2) -> LEvaluation:
    """Evaluate the family three ways: literal sum, (eta-zeta, zeta) form, reduced power form."""
    _require_positive(v)
    literal = None
    for r, a in family.terms:
        a = float(a)
        term = laplace_beltrami(g, v ** a, order) / (v ** a) * float(r)
        literal = term if literal is None else literal + term
    zeta, eta = float(family.zeta), float(family.eta)
    grad = gradient(g, v, order)
    dv = differential(v, order)
    grad_sq = np.einsum("...i,...i->...", grad.components, dv.components)
    lap = laplace_beltrami(g, v, order)
    closed_vals = (eta - zeta) * grad_sq / v.values ** 2 + zeta * lap.values / v.values
    closed = ScalarField(g.grid, _zero_outside(closed_vals, lap.mask), lap.mask & grad.mask)
    red = reduce(family)
    reduced = None
    if red.valid:
        t = 1.0 / float(red.alpha)
        reduced = laplace_beltrami(g, v ** t, order) / (v ** t) * float(red.beta)
    return LEvaluation(literal, closed, reduced)


@dataclass(frozen=True)
class HEvaluation:
    literal: TensorField
    closed: TensorField
    reduced: TensorField | None


def eval_H_family(family: OpFamily, g: MetricField, v: ScalarField, order: int = 2) -> HEvaluation:
    """Hessian analogue: sum r_i H^{v^a_i}/v^a_i against (eta-zeta) dv(x)dv/v^2 + zeta H^v/v."""
    _require_positive(v)
    vals = v.values[..., None, None]
    literal = 0.0
    mask = None
    for r, a in family.terms:
        h = hessian(g, v ** float(a), order)
        literal = literal + float(r) * h.components / vals ** float(a)
        mask = h.mask if mask is None else mask & h.mask
    zeta, eta = float(family.zeta), float(family.eta)
    dv = _first_derivs(v.values, g.grid, order)
    hv = hessian(g, v, order)
    closed = (eta - zeta) * np.einsum("...i,...j->...ij", dv, dv) / vals ** 2 + zeta * hv.components / vals
    red = reduce(family)
    reduced = None
    if red.valid:
        t = 1.0 / float(red.alpha)
        ht = hessian(g, v ** t, order)
        reduced = TensorField(g.grid, float(red.beta) * ht.components / vals ** t, "dd", ht.mask)
    return HEvaluation(
        TensorField(g.grid, literal, "dd", mask),
        TensorField(g.grid, _zero_outside(closed, hv.mask), "dd", hv.mask),
        reduced,
    )


def lap_power(g: MetricField, v: ScalarField, t: float, order: int = 2):
    """Lap(v^t) directly and via t[(t-1) v^(t-2) |grad v|^2 + v^(t-1) Lap v]; returns (direct, identity, diff)."""
    _require_positive(v)
    direct = laplace_beltrami(g, v ** t, order)
    grad = gradient(g, v, order)
    dv = differential(v, order)
    grad_sq = np.einsum("...i,...i->...", grad.components, dv.components)
    lap = laplace_beltrami(g, v, order)
    x = v.values
    ident_vals = t * ((t - 1) * x ** (t - 2) * grad_sq + x ** (t - 1) * lap.values)
    ident = ScalarField(g.grid, _zero_outside(ident_vals, lap.mask), lap.mask)
    return direct, ident, direct - ident


def conformal_laplacian_identity(g: MetricField, u: ScalarField, r: float, f: ScalarField,
                                 order: int = 2) -> ScalarField:
    """u^r Lap_{u^r g} f - [r(n-2)/2 g(grad u/u, grad f) + Lap_g f]."""
    _require_positive(u, "u")
    n = g.dim
    scaled = g.scaled(u.values ** r)
    lhs = laplace_beltrami(scaled, f, order) * (u ** r)
    grad_u = gradient(g, u, order)
    df = differential(f, order)
    cross = np.einsum("...i,...i->...", grad_u.components, df.components) / u.values
    rhs = laplace_beltrami(g, f, order) + ScalarField(g.grid, r * (n - 2) / 2 * cross, grad_u.mask)
    return lhs - rhs


def conformal_scalar_identity(g: MetricField, v: ScalarField, r: float, order: int = 2) -> ScalarField:
    """v^r S_{v^r g} minus its closed form.

    n >= 3: S_g - (n-1) 4/(n-2) Lap(v^t)/v^t with t = (n-2) r / 4.
    n == 2: S_g + r (|grad v|^2/v^2 - Lap v / v).
    """
    _require_positive(v)
    n = g.dim
    lhs = scalar_curvature(g.scaled(v.values ** r), order) * (v ** r)
    s = scalar_curvature(g, order)
    if n >= 3:
        t = (n - 2) * r / 4
        rhs = s - laplace_beltrami(g, v ** t, order) / (v ** t) * ((n - 1) * 4 / (n - 2))
    elif n == 2:
        grad = gradient(g, v, order)
        dv = differential(v, order)
        grad_sq = np.einsum("...i,...i->...", grad.components, dv.components)
        lap = laplace_beltrami(g, v, order)
        rhs = s + ScalarField(g.grid, r * (grad_sq / v.values ** 2 - lap.values / v.values), lap.mask)
    else:
        raise ValueError("conformal scalar identity needs dimension >= 2")
    return lhs - rhs


def family_from_pairs(pairs: Sequence[Sequence[float]]) -> OpFamily:
    return OpFamily(tuple((r, a) for r, a in pairs))
