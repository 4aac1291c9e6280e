"""Base conformal warped products g = c^2 g_B + w^2 g_F.

Each ``bcwp_*`` function evaluates the closed-form block formulas in natural
product coordinates from base/fiber data alone.  The assembled product metric
is available through :func:`assemble` so every formula can be compared against
the brute-force routines in :mod:`warpcurv.geometry`.

Base indices come first (0..m-1), fiber indices after (m..m+k-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import geometry as geo
from .geometry import ChartGrid, MetricField, ScalarField, TensorField

__all__ = [
    "BcwpFunctions",
    "BcwpSpec",
    "BlockRecord",
    "assemble",
    "lift_base",
    "lift_fiber",
    "bcwp_gradient",
    "bcwp_connection",
    "bcwp_hessian",
    "bcwp_laplacian",
    "bcwp_riemann",
    "bcwp_ricci",
    "bcwp_scalar",
    "OracleCheck",
    "oracle_checks",
    "GeodesicResult",
    "GeodesicExitError",
    "geodesic_integrate",
]


@dataclass(frozen=True)
class BcwpFunctions:
    """Closed-form description: nested entry lists take coordinates as arguments."""

    base_entries: Sequence[Sequence[object]]
    fiber_entries: Sequence[Sequence[object]]
    c: Callable
    w: Callable


def _positive(values: np.ndarray, what: str):
    if not np.all(values > 0):
        raise ValueError(f"{what} must be strictly positive on the base grid")


@dataclass(frozen=True, eq=False)
class BcwpSpec:
    base: MetricField
    fiber: MetricField
    c: ScalarField
    w: ScalarField
    functions: BcwpFunctions | None = field(default=None)

    def __post_init__(self):
        if self.c.grid != self.base.grid or self.w.grid != self.base.grid:
            raise ValueError("c and w must live on the base grid")
        _positive(self.c.values, "conformal factor c")
        _positive(self.w.values, "warping function w")

    @classmethod
    def from_functions(cls, base_grid: ChartGrid, fiber_grid: ChartGrid, fns: BcwpFunctions,
                       base_signature=None, fiber_signature=None) -> "BcwpSpec":
        base = MetricField.from_functions(base_grid, fns.base_entries, base_signature)
        fiber = MetricField.from_functions(fiber_grid, fns.fiber_entries, fiber_signature)
        return cls(base, fiber, base_grid.sample(fns.c), base_grid.sample(fns.w), fns)

    @property
    def m(self) -> int:
        return self.base.dim

    @property
    def k(self) -> int:
        return self.fiber.dim

    @property
    def n(self) -> int:
        return self.m + self.k

    @cached_property
    def grid(self) -> ChartGrid:
        return self.base.grid.product(self.fiber.grid)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape


def lift_base(spec: BcwpSpec, arr: np.ndarray, full: bool = True) -> np.ndarray:
    """Broadcast base-grid data (grid axes first) along the fiber axes."""
    arr = np.asarray(arr)
    bshape = spec.base.grid.shape
    tail = arr.shape[len(bshape):]
    out = arr.reshape(bshape + (1,) * spec.fiber.grid.dim + tail)
    return np.broadcast_to(out, spec.shape + tail) if full else out


def lift_fiber(spec: BcwpSpec, arr: np.ndarray, full: bool = True) -> np.ndarray:
    arr = np.asarray(arr)
    fshape = spec.fiber.grid.shape
    tail = arr.shape[len(fshape):]
    out = arr.reshape((1,) * spec.base.grid.dim + fshape + tail)
    return np.broadcast_to(out, spec.shape + tail) if full else out


def _lift_mask(spec: BcwpSpec, base_mask, fiber_mask) -> np.ndarray:
    return lift_base(spec, base_mask) & lift_fiber(spec, fiber_mask)


def assemble(spec: BcwpSpec) -> MetricField:
    """Block-diagonal metric c^2 g_B (+) w^2 g_F on the product grid."""
    m, n = spec.m, spec.n
    g = np.zeros(spec.shape + (n, n))
    c2 = spec.c.values[..., None, None] ** 2
    w2 = spec.w.values[..., None, None] ** 2
    g[..., :m, :m] = lift_base(spec, c2 * spec.base.components)
    g[..., m:, m:] = lift_base(spec, w2, full=False) * lift_fiber(spec, spec.fiber.components, full=False)
    sig = tuple(spec.base.signature) + tuple(spec.fiber.signature)
    return MetricField(spec.grid, g, sig)


def lift_scalar(spec: BcwpSpec, phi: ScalarField | None = None, psi: ScalarField | None = None) -> ScalarField:
    """phi o pi + psi o sigma on the product grid."""
    vals = np.zeros(spec.shape)
    if phi is not None:
        vals = vals + lift_base(spec, phi.values)
    if psi is not None:
        vals = vals + lift_fiber(spec, psi.values)
    return ScalarField(spec.grid, vals)


# ---------------------------------------------------------------------------
# factor data

class _FactorData:
    """Derivatives and curvature of the factors, computed once per (spec, order)."""

    def __init__(self, spec: BcwpSpec, order: int):
        self.spec = spec
        self.order = order
        b, f = spec.base, spec.fiber
        self.gB = b.components
        self.gBi = b.inverse()
        self.gF = f.components
        self.gFi = f.inverse()
        self.c = spec.c.values
        self.w = spec.w.values
        self.GB = geo.christoffel(b, order)
        self.GF = geo.christoffel(f, order)
        self.dc = geo.differential(spec.c, order).components
        self.dw = geo.differential(spec.w, order).components
        self.grad_c = np.einsum("...ab,...b->...a", self.gBi, self.dc)
        self.grad_w = np.einsum("...ab,...b->...a", self.gBi, self.dw)
        self.HcB = geo.hessian(b, spec.c, order, self.GB).components
        self.HwB = geo.hessian(b, spec.w, order, self.GB).components
        self.lap_c = np.einsum("...ab,...ab->...", self.gBi, self.HcB)
        self.lap_w = np.einsum("...ab,...ab->...", self.gBi, self.HwB)
        self.cc = np.einsum("...a,...a->...", self.grad_c, self.dc)     # |grad c|^2_B
        self.ww = np.einsum("...a,...a->...", self.grad_w, self.dw)
        self.wc = np.einsum("...a,...a->...", self.grad_w, self.dc)
        self.base_mask = geo._all_edges(b.grid, order)
        self.fiber_mask = geo._all_edges(f.grid, order)
        self.mask = _lift_mask(spec, self.base_mask, self.fiber_mask)

    @cached_property
    def RB(self):
        return geo.riemann(self.spec.base, self.order).components

    @cached_property
    def RF(self):
        return geo.riemann(self.spec.fiber, self.order).components

    @cached_property
    def RicB(self):
        return geo.ricci(self.spec.base, self.order).components

    @cached_property
    def RicF(self):
        return geo.ricci(self.spec.fiber, self.order).components

    @cached_property
    def SB(self):
        return np.einsum("...ij,...ij->...", self.gBi, self.RicB)

    @cached_property
    def SF(self):
        return np.einsum("...ij,...ij->...", self.gFi, self.RicF)

    def product_hessian_base(self, dphi: np.ndarray, Hphi: np.ndarray, grad_phi_c: np.ndarray):
        """Base block of the product Hessian of a base function."""
        c = self.c[..., None, None]
        sym = np.einsum("...a,...b->...ab", self.dc, dphi)
        return Hphi + self.gB * grad_phi_c[..., None, None] / c - (sym + np.swapaxes(sym, -1, -2)) / c


@dataclass(frozen=True, eq=False)
class BlockRecord:
    """Formula values on the product grid together with the named blocks used to build them."""

    full: object
    blocks: dict

    @property
    def mask(self):
        return self.full.mask


def _eye(n):
    return np.eye(n)


# ---------------------------------------------------------------------------
# first-order quantities

def bcwp_gradient(spec: BcwpSpec, phi: ScalarField, order: int = 2) -> BlockRecord:
    """grad(phi o pi) = grad_B phi / c^2, with no fiber components."""
    fd = _FactorData(spec, order)
    dphi = geo.differential(phi, order).components
    base = np.einsum("...ab,...b->...a", fd.gBi, dphi) / fd.c[..., None] ** 2
    full = np.zeros(spec.shape + (spec.n,))
    full[..., :spec.m] = lift_base(spec, base)
    return BlockRecord(TensorField(spec.grid, full, "u", fd.mask), {"base": base})


def bcwp_connection(spec: BcwpSpec, order: int = 2) -> BlockRecord:
    """Christoffel symbols of the product from the three covariant-derivative formulas."""
    fd = _FactorData(spec, order)
    m, k, n = spec.m, spec.k, spec.n
    c = fd.c[..., None, None, None]
    eB = _eye(m)
    # nabla_X Y = nabla^B_X Y + X(c)/c Y + Y(c)/c X - g_B(X,Y)/c grad^B c
    dlc = fd.dc / fd.c[..., None]
    bbb = (fd.GB.components
           + np.einsum("...b,ac->...abc", dlc, eB)
           + np.einsum("...c,ab->...abc", dlc, eB)
           - np.einsum("...bc,...a->...abc", fd.gB, fd.grad_c) / c)
    # nabla_X V = nabla_V X = X(w)/w V
    mixed = fd.dw / fd.w[..., None]
    # nabla_V W = nabla^F_V W - (w/c^2) g_F(V,W) grad^B w
    to_base = -(fd.w / fd.c ** 2)[..., None] * fd.grad_w     # multiplies g_F(V,W)
    full = np.zeros(spec.shape + (n, n, n))
    full[..., :m, :m, :m] = lift_base(spec, bbb)
    eF = _eye(k)
    # Gamma^alpha_{b beta} = Gamma^alpha_{beta b} = (d_b w / w) delta^alpha_beta
    mix_full = np.broadcast_to(
        np.einsum("...b,ag->...abg", lift_base(spec, mixed, full=False), eF), spec.shape + (k, m, k))
    full[..., m:, :m, m:] = mix_full
    full[..., m:, m:, :m] = np.swapaxes(mix_full, -1, -2)
    full[..., m:, m:, m:] = lift_fiber(spec, fd.GF.components)
    full[..., :m, m:, m:] = np.einsum("...a,...bg->...abg", lift_base(spec, to_base, full=False),
                                      lift_fiber(spec, fd.gF, full=False))
    return BlockRecord(TensorField(spec.grid, full, "udd", fd.mask),
                       {"base_base": bbb, "mixed": mixed, "fiber_fiber": fd.GF.components,
                        "fiber_to_base": to_base})


def bcwp_hessian(spec: BcwpSpec, phi: ScalarField | None = None, psi: ScalarField | None = None,
                 order: int = 2) -> BlockRecord:
    """Hessian of phi o pi + psi o sigma assembled from the six block formulas."""
    fd = _FactorData(spec, order)
    m, k, n = spec.m, spec.k, spec.n
    full = np.zeros(spec.shape + (n, n))
    blocks = {}
    if phi is not None:
        dphi = geo.differential(phi, order).components
        Hphi = geo.hessian(spec.base, phi, order, fd.GB).components
        grad_phi = np.einsum("...ab,...b->...a", fd.gBi, dphi)
        bb = fd.product_hessian_base(dphi, Hphi, np.einsum("...a,...a->...", grad_phi, fd.dc))
        # H^phi(V,W) = (w/c^2) g_F(V,W) g_B(grad w, grad phi)
        coef = fd.w / fd.c ** 2 * np.einsum("...a,...a->...", grad_phi, fd.dw)
        ff = lift_base(spec, coef, full=False)[..., None, None] * lift_fiber(spec, fd.gF, full=False)
        full[..., :m, :m] += lift_base(spec, bb)
        full[..., m:, m:] += ff
        blocks.update(phi_base=bb, phi_fiber=coef)
    if psi is not None:
        dpsi = geo.differential(psi, order).components
        Hpsi = geo.hessian(spec.fiber, psi, order, fd.GF).components
        # H^psi(X,V) = -X(w) V(psi) / w
        bf = -np.einsum("...a,...b->...ab", lift_base(spec, fd.dw / fd.w[..., None], full=False),
                        lift_fiber(spec, dpsi, full=False))
        full[..., :m, m:] += bf
        full[..., m:, :m] += np.swapaxes(bf, -1, -2)
        full[..., m:, m:] += lift_fiber(spec, Hpsi)
        blocks.update(psi_mixed=bf, psi_fiber=Hpsi)
    return BlockRecord(TensorField(spec.grid, full, "dd", fd.mask), blocks)


def bcwp_laplacian(spec: BcwpSpec, phi: ScalarField | None = None, psi: ScalarField | None = None,
                   order: int = 2) -> BlockRecord:
    """Lap(phi o pi + psi o sigma).

    Base part: Lap_B phi / c^2 + (m-2)/c^3 g_B(grad phi, grad c) + k/(c^2 w) g_B(grad w, grad phi);
    fiber part: Lap_F psi / w^2.
    """
    fd = _FactorData(spec, order)
    m, k = spec.m, spec.k
    vals = np.zeros(spec.shape)
    blocks = {}
    if phi is not None:
        dphi = geo.differential(phi, order).components
        grad_phi = np.einsum("...ab,...b->...a", fd.gBi, dphi)
        lapB = geo.laplace_beltrami(spec.base, phi, order, gamma=fd.GB).values
        base = (lapB / fd.c ** 2
                + (m - 2) / fd.c ** 3 * np.einsum("...a,...a->...", grad_phi, fd.dc)
                + k / (fd.c ** 2 * fd.w) * np.einsum("...a,...a->...", grad_phi, fd.dw))
        vals = vals + lift_base(spec, base)
        blocks["base"] = base
    if psi is not None:
        lapF = geo.laplace_beltrami(spec.fiber, psi, order, gamma=fd.GF).values
        fib = lift_fiber(spec, lapF, full=False) / lift_base(spec, fd.w, full=False) ** 2
        vals = vals + fib
        blocks["fiber"] = lapF
    return BlockRecord(ScalarField(spec.grid, geo._zero_outside(vals, fd.mask), fd.mask), blocks)


# ---------------------------------------------------------------------------
# curvature

def _hw_vector(fd: _FactorData) -> np.ndarray:
    """h^w(d_c)^a = nabla_{d_c} grad w on the product, expressed with base data only.

    -2 X(c)/c^3 grad^B w + (1/c^2)(nabla^B_X grad^B w + X(c)/c grad^B w
    + g_B(grad w, grad c)/c X - X(w)/c grad^B c)
    """
    c = fd.c[..., None, None]
    eB = _eye(fd.spec.m)
    nab_grad_w = np.einsum("...ae,...ce->...ca", fd.gBi, fd.HwB)       # [c, a]
    dc_gw = np.einsum("...c,...a->...ca", fd.dc, fd.grad_w)
    dw_gc = np.einsum("...c,...a->...ca", fd.dw, fd.grad_c)
    return (-2 * dc_gw / c ** 3
            + (nab_grad_w + dc_gw / c + fd.wc[..., None, None] / c * eB - dw_gc / c) / c ** 2)


def bcwp_riemann(spec: BcwpSpec, order: int = 2) -> BlockRecord:
    """R^l_ijk of the product (R(d_j, d_k) d_i = R^l_ijk d_l) from the six block formulas."""
    fd = _FactorData(spec, order)
    m, k, n = spec.m, spec.k, spec.n
    eB, eF = _eye(m), _eye(k)
    c = fd.c
    c4 = c[..., None, None, None, None]
    # product Hessians of c and w restricted to the base
    Hc = fd.product_hessian_base(fd.dc, fd.HcB, fd.cc)
    Hw = fd.product_hessian_base(fd.dw, fd.HwB, fd.wc)
    nab_grad_c = np.einsum("...ae,...de->...da", fd.gBi, fd.HcB)       # nabla^B_d grad^B c, [d, a]

    # item 1: R(X,Y)Z with X = d_c, Y = d_d, Z = d_b  -> R^a_{b c d}
    bbbb = (fd.RB
            - np.einsum("...db,ac->...abcd", Hc, eB) / c4
            + np.einsum("...cb,ad->...abcd", Hc, eB) / c4
            + 2 * np.einsum("...c,...db,...a->...abcd", fd.dc, fd.gB, fd.grad_c) / c4 ** 2
            - 2 * np.einsum("...d,...cb,...a->...abcd", fd.dc, fd.gB, fd.grad_c) / c4 ** 2
            + np.einsum("...cb,...da->...abcd", fd.gB, nab_grad_c) / c4
            - np.einsum("...db,...ca->...abcd", fd.gB, nab_grad_c) / c4)

    # item 2: R(X,V)Y = H^w(X,Y)/w V  -> R^alpha_{b c beta} = H^w_{cb}/w delta^alpha_beta
    item2 = Hw / fd.w[..., None, None]                                  # [c, b]
    # item 5: R(V,X)W = w g_F(V,W) h^w(X) -> R^a_{gamma beta c} = w g_F[beta,gamma] h^w(d_c)^a
    hw = _hw_vector(fd)                                                 # [c, a]
    # item 6: R(V,W)U = R_F(V,W)U + |grad w|^2_B/c^2 (g_F(V,U) W - g_F(W,U) V)
    grad_w_sq = fd.ww / c ** 2

    full = np.zeros(spec.shape + (n,) * 4)
    full[..., :m, :m, :m, :m] = lift_base(spec, bbbb)
    i2 = np.einsum("...cb,ag->...abcg", lift_base(spec, item2, full=False), eF)
    i2 = np.broadcast_to(i2, spec.shape + (k, m, m, k))
    full[..., m:, :m, :m, m:] = i2
    full[..., m:, :m, m:, :m] = -np.swapaxes(i2, -1, -2)
    i5 = np.einsum("...,...bg,...ca->...agbc", lift_base(spec, fd.w, full=False),
                   lift_fiber(spec, fd.gF, full=False), lift_base(spec, hw, full=False))
    i5 = np.broadcast_to(i5, spec.shape + (m, k, k, m))
    full[..., :m, m:, m:, :m] = i5
    full[..., :m, m:, :m, m:] = -np.swapaxes(i5, -1, -2)
    gF = lift_fiber(spec, fd.gF, full=False)
    extra = (np.einsum("...bg,ad->...agbd", gF, eF) - np.einsum("...dg,ab->...agbd", gF, eF))
    i6 = lift_fiber(spec, fd.RF, full=False) + lift_base(spec, grad_w_sq, full=False)[..., None, None, None, None] * extra
    full[..., m:, m:, m:, m:] = i6
    blocks = {"base": bbbb, "item2": item2, "h_w": hw, "fiber_shift": grad_w_sq}
    return BlockRecord(TensorField(spec.grid, full, "uddd", fd.mask), blocks)


def bcwp_ricci(spec: BcwpSpec, order: int = 2) -> BlockRecord:
    """Ricci tensor from the base, mixed (zero) and fiber block formulas."""
    fd = _FactorData(spec, order)
    m, k, n = spec.m, spec.k, spec.n
    c, w = fd.c[..., None, None], fd.w[..., None, None]
    dcdc = np.einsum("...a,...b->...ab", fd.dc, fd.dc)
    dcdw = np.einsum("...a,...b->...ab", fd.dc, fd.dw)
    cc = fd.cc[..., None, None]
    wc = fd.wc[..., None, None]
    base = (fd.RicB - (m - 2) * fd.HcB / c + 2 * (m - 2) * dcdc / c ** 2
            - ((m - 3) * cc / c ** 2 + fd.lap_c[..., None, None] / c) * fd.gB
            - k * fd.HwB / w - k * wc / (w * c) * fd.gB
            + k * (dcdw + np.swapaxes(dcdw, -1, -2)) / (c * w))
    coef = (fd.w ** 2 / fd.c ** 2) * ((m - 2) * fd.wc / (fd.w * fd.c) + fd.lap_w / fd.w
                                     + (k - 1) * fd.ww / fd.w ** 2)
    fiber = (lift_fiber(spec, fd.RicF, full=False)
             - lift_base(spec, coef, full=False)[..., None, None] * lift_fiber(spec, fd.gF, full=False))
    full = np.zeros(spec.shape + (n, n))
    full[..., :m, :m] = lift_base(spec, base)
    full[..., m:, m:] = fiber
    return BlockRecord(TensorField(spec.grid, full, "dd", fd.mask),
                       {"base": base, "fiber_coefficient": coef})


def bcwp_scalar(spec: BcwpSpec, order: int = 2) -> BlockRecord:
    """S from c^2 S = S_B + S_F c^2/w^2 - 2(m-1) Lap_B c/c - 2k Lap_B w/w
    - (m-4)(m-1)|grad c|^2/c^2 - 2k(m-2) g_B(grad w, grad c)/(wc) - k(k-1)|grad w|^2/w^2."""
    fd = _FactorData(spec, order)
    m, k = spec.m, spec.k
    c, w = fd.c, fd.w
    base_part = (fd.SB - 2 * (m - 1) * fd.lap_c / c - 2 * k * fd.lap_w / w
                 - (m - 4) * (m - 1) * fd.cc / c ** 2 - 2 * k * (m - 2) * fd.wc / (w * c)
                 - k * (k - 1) * fd.ww / w ** 2)
    c2 = lift_base(spec, c, full=False) ** 2
    vals = (lift_base(spec, base_part, full=False)
            + lift_fiber(spec, fd.SF, full=False) * c2 / lift_base(spec, w, full=False) ** 2) / c2
    vals = np.broadcast_to(vals, spec.shape)
    return BlockRecord(ScalarField(spec.grid, geo._zero_outside(vals, fd.mask), fd.mask),
                       {"base_part": base_part, "fiber_scalar": fd.SF})


# ---------------------------------------------------------------------------
# oracle comparison

@dataclass(frozen=True)
class OracleCheck:
    quantity: str
    formula_scale: float
    oracle_scale: float
    discrepancy: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.quantity:<22} formula={self.formula_scale:.6e} oracle={self.oracle_scale:.6e} "
                f"discrepancy={self.discrepancy:.3e} tol={self.tolerance:.1e} {status}")


def _check(name, formula, oracle, tol, order) -> OracleCheck:
    margin = 2 * geo.stencil_radius(order)
    return OracleCheck(name, geo.field_scale(formula, margin), geo.field_scale(oracle, margin),
                       geo.max_discrepancy(formula, oracle, order=order), tol)


def oracle_checks(spec: BcwpSpec, tol: float, order: int = 2, phi: ScalarField | None = None,
                  psi: ScalarField | None = None, what: Sequence[str] | None = None) -> list[OracleCheck]:
    """Compare every block formula with the oracle on the assembled metric."""
    what = set(what or ["gradient", "connection", "hessian", "laplacian", "riemann", "ricci", "scalar"])
    g = assemble(spec)
    out = []
    if phi is None:
        phi = spec.base.grid.sample(lambda *x: np.sin(sum((i + 1) * xi for i, xi in enumerate(x))))
    if psi is None:
        psi = spec.fiber.grid.sample(lambda *y: np.cos(sum((i + 2) * yi for i, yi in enumerate(y))))
    lifted = lift_scalar(spec, phi, psi)
    gamma = geo.christoffel(g, order)
    if "gradient" in what:
        out.append(_check("gradient", bcwp_gradient(spec, phi, order).full,
                          geo.gradient(g, lift_scalar(spec, phi), order), tol, order))
    if "connection" in what:
        out.append(_check("connection", bcwp_connection(spec, order).full, gamma, tol, order))
    if "hessian" in what:
        out.append(_check("hessian", bcwp_hessian(spec, phi, psi, order).full,
                          geo.hessian(g, lifted, order, gamma), tol, order))
    if "laplacian" in what:
        out.append(_check("laplacian", bcwp_laplacian(spec, phi, psi, order).full,
                          geo.laplace_beltrami(g, lifted, order, gamma=gamma), tol, order))
    if what & {"riemann", "ricci", "scalar"}:
        rm = geo.riemann(g, order)
        ric = geo.ricci(g, order, rm)
        if "riemann" in what:
            out.append(_check("riemann", bcwp_riemann(spec, order).full, rm, tol, order))
        if "ricci" in what:
            formula = bcwp_ricci(spec, order).full
            out.append(_check("ricci", formula, ric, tol, order))
            m = spec.m
            margin = 2 * geo.stencil_radius(order)
            mask = ric.mask & spec.grid.interior(margin)
            mix = float(np.max(np.abs(ric.components[..., :m, m:][mask]))) if np.any(mask) else 0.0
            out.append(OracleCheck("ricci mixed block", 0.0, mix, mix, tol))
        if "scalar" in what:
            out.append(_check("scalar", bcwp_scalar(spec, order).full,
                              geo.scalar_curvature(g, order, ric), tol, order))
    return out


# ---------------------------------------------------------------------------
# geodesics

class GeodesicExitError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class GeodesicResult:
    times: np.ndarray
    points: np.ndarray          # [step, n]
    velocities: np.ndarray      # [step, n]
    base_residual: np.ndarray   # per-step norm of the base equation residual
    fiber_residual: np.ndarray
    pregeodesic_defect: np.ndarray
    clairaut: np.ndarray        # w^4 g_F(beta', beta')


def _local_metric_data(fns: BcwpFunctions, base_point, fiber_point, h: float, order: int = 4):
    """Christoffels of base, fiber and product plus c, w data at one point, by local stencils."""
    m, k = len(base_point), len(fiber_point)
    bnames = [f"x{i}" for i in range(m)]
    fnames = [f"y{i}" for i in range(k)]
    bg = ChartGrid.centered(bnames, base_point, h, 5)
    fg = ChartGrid.centered(fnames, fiber_point, h, 5)
    spec = BcwpSpec.from_functions(bg, fg, fns)
    centre = (2,) * (m + k)
    bc, fc = (2,) * m, (2,) * k
    fd = _FactorData(spec, order)
    prod_gamma = geo.christoffel(assemble(spec), order).components[centre]
    return {
        "gamma": prod_gamma,
        "GB": fd.GB.components[bc], "GF": fd.GF.components[fc],
        "gB": fd.gB[bc], "gF": fd.gF[fc],
        "c": fd.c[bc], "w": fd.w[bc],
        "dc": fd.dc[bc], "dw": fd.dw[bc],
        "grad_c": fd.grad_c[bc], "grad_w": fd.grad_w[bc],
    }


def geodesic_integrate(spec: BcwpSpec, point, velocity, step: float | None = None,
                       steps: int = 100, local_h: float = 1e-3) -> GeodesicResult:
    """Classical RK4 on the product geodesic equation, reporting the residual of the
    split base/fiber equations along the computed curve.

    Base:  alpha'' = -2 alpha'(c)/c alpha' + g_B(alpha',alpha')/c grad c + w g_F(beta',beta')/c^2 grad w
    Fiber: beta''  = -2 alpha'(w)/w beta'
    (accelerations are covariant with respect to g_B and g_F).
    """
    if spec.functions is None:
        raise ValueError("geodesic integration needs a spec built from closed-form functions")
    fns = spec.functions
    m, k, n = spec.m, spec.k, spec.n
    if step is None:
        step = min(spec.grid.spacings) / 4
    x = np.asarray(point, dtype=float)
    v = np.asarray(velocity, dtype=float)
    if x.shape != (n,) or v.shape != (n,):
        raise ValueError(f"point and velocity need {n} components")
    if not spec.grid.contains(x):
        raise GeodesicExitError("initial point outside the grid domain")

    def accel(x, v):
        d = _local_metric_data(fns, x[:m], x[m:], local_h)
        return -np.einsum("kij,i,j->k", d["gamma"], v, v), d

    times, pts, vels, rb, rf, pre, cl = [], [], [], [], [], [], []

    def record(t, x, v):
        a, d = accel(x, v)
        al, be = v[:m], v[m:]
        acc_b = a[:m] + np.einsum("kij,i,j->k", d["GB"], al, al)
        acc_f = a[m:] + np.einsum("kij,i,j->k", d["GF"], be, be)
        c, w = d["c"], d["w"]
        al_c, al_w = d["dc"] @ al, d["dw"] @ al
        gbb = al @ d["gB"] @ al
        gff = be @ d["gF"] @ be
        rhs_b = -2 * al_c / c * al + gbb / c * d["grad_c"] + w * gff / c ** 2 * d["grad_w"]
        rhs_f = -2 * al_w / w * be
        times.append(t)
        pts.append(x.copy())
        vels.append(v.copy())
        rb.append(float(np.linalg.norm(acc_b - rhs_b)))
        rf.append(float(np.linalg.norm(acc_f - rhs_f)))
        na, nb = np.linalg.norm(acc_f), np.linalg.norm(be)
        if na == 0 or nb == 0:
            pre.append(0.0)
        else:
            cos = abs(acc_f @ be) / (na * nb)
            pre.append(float(np.sqrt(max(0.0, 1 - min(1.0, cos) ** 2))))
        cl.append(float(w ** 4 * gff))
        return a

    def result():
        return GeodesicResult(np.array(times), np.array(pts), np.array(vels), np.array(rb),
                              np.array(rf), np.array(pre), np.array(cl))

    t = 0.0
    a = record(t, x, v)
    for _ in range(steps):
        def f(state):
            xs, vs = state[:n], state[n:]
            if not spec.grid.contains(xs):
                raise GeodesicExitError("trajectory left the grid domain", result())
            return np.concatenate([vs, accel(xs, vs)[0]])

        s = np.concatenate([x, v])
        k1 = np.concatenate([v, a])
        k2 = f(s + 0.5 * step * k1)
        k3 = f(s + 0.5 * step * k2)
        k4 = f(s + step * k3)
        s = s + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x, v = s[:n], s[n:]
        t += step
        if not spec.grid.contains(x):
            raise GeodesicExitError("trajectory left the grid domain", result())
        a = record(t, x, v)
    return result()
