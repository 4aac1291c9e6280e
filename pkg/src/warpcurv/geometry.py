"""Finite-difference tensor calculus on rectangular coordinate charts.

Everything here is the brute-force reference: metrics are sampled on a grid,
derivatives come from central-difference stencils and curvature is assembled
from the textbook component formulas.

Index conventions (all arrays carry the grid axes first, tensor slots last):

* ``christoffel(g).components[..., k, i, j]`` is Gamma^k_ij.
* ``riemann(g).components[..., l, i, j, k]`` is R^l_ijk, defined by
  R(d_j, d_k) d_i = R^l_ijk d_l with R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y].
* ``ricci(g).components[..., i, k]`` is R^j_ijk.

With these choices the unit 2-sphere has R_{theta phi theta phi} = sin^2 theta
and scalar curvature 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Axis",
    "ChartGrid",
    "ScalarField",
    "TensorField",
    "MetricField",
    "SingularMetricError",
    "stencil_radius",
    "partial_derivative",
    "second_partial",
    "christoffel",
    "riemann",
    "lower_riemann",
    "ricci",
    "scalar_curvature",
    "gradient",
    "differential",
    "hessian",
    "laplace_beltrami",
    "inner",
    "max_discrepancy",
    "field_scale",
    "pairwise_max",
    "l2_norm",
]


class SingularMetricError(ValueError):
    """Raised when the metric determinant vanishes (relative to its scale)."""


_STENCIL_RADIUS = {2: 1, 4: 2}


def stencil_radius(order: int) -> int:
    try:
        return _STENCIL_RADIUS[order]
    except KeyError:
        raise ValueError(f"finite-difference order must be 2 or 4, got {order}") from None


@dataclass(frozen=True)
class Axis:
    name: str
    origin: float
    spacing: float
    count: int
    periodic: bool = False

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError(f"axis {self.name!r}: spacing must be positive")
        if int(self.count) != self.count or self.count < 5:
            raise ValueError(f"axis {self.name!r}: need at least 5 nodes, got {self.count}")

    @property
    def coords(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.count)

    @property
    def end(self) -> float:
        return self.origin + self.spacing * (self.count - 1)


@dataclass(frozen=True)
class ChartGrid:
    """Rectangular lattice covering one coordinate chart."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ValueError("a chart needs at least one axis")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names: {names}")

    @classmethod
    def uniform(cls, names: Sequence[str], origins, spacing, count, periodic=False) -> "ChartGrid":
        n = len(names)
        spacings = np.broadcast_to(np.asarray(spacing, dtype=float), (n,))
        counts = np.broadcast_to(np.asarray(count), (n,))
        per = np.broadcast_to(np.asarray(periodic), (n,))
        return cls(tuple(Axis(nm, float(o), float(h), int(c), bool(p))
                         for nm, o, h, c, p in zip(names, origins, spacings, counts, per)))

    @classmethod
    def centered(cls, names: Sequence[str], centers, spacing, count) -> "ChartGrid":
        """Grid whose middle node sits at ``centers`` (count should be odd)."""
        n = len(names)
        centers = np.broadcast_to(np.asarray(centers, dtype=float), (n,))
        spacings = np.broadcast_to(np.asarray(spacing, dtype=float), (n,))
        counts = np.broadcast_to(np.asarray(count), (n,))
        origins = centers - spacings * (counts - 1) / 2
        return cls.uniform(names, origins, spacings, counts)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(a.spacing for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[a.coords for a in self.axes], indexing="ij"))

    def product(self, other: "ChartGrid") -> "ChartGrid":
        return ChartGrid(self.axes + other.axes)

    def contains(self, point) -> bool:
        return all(a.origin <= x <= a.end or a.periodic for a, x in zip(self.axes, point))

    def interior(self, margin: int) -> np.ndarray:
        """Boolean mask of nodes at distance >= margin from every non-periodic edge."""
        mask = np.ones(self.shape, dtype=bool)
        for ax, a in enumerate(self.axes):
            if a.periodic or margin <= 0:
                continue
            if 2 * margin >= a.count:
                raise ValueError(f"axis {a.name!r} too short for margin {margin}")
            idx = [slice(None)] * self.dim
            idx[ax] = slice(0, margin)
            mask[tuple(idx)] = False
            idx[ax] = slice(a.count - margin, None)
            mask[tuple(idx)] = False
        return mask

    def sample(self, fn: Callable[..., np.ndarray]) -> "ScalarField":
        values = np.broadcast_to(np.asarray(fn(*self.mesh()), dtype=float), self.shape)
        return ScalarField(self, np.array(values))


def _full_mask(grid: ChartGrid, mask) -> np.ndarray:
    if mask is None:
        return np.ones(grid.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise ValueError("mask shape does not match grid")
    return mask


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: ChartGrid
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values have shape {values.shape}, grid is {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", _full_mask(self.grid, self.mask))

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, op(self.values, other.values), self.mask & other.mask)
        return ScalarField(self.grid, op(self.values, other), self.mask)

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, np.divide)

    def __pow__(self, t):
        return ScalarField(self.grid, self.values ** t, self.mask)

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.mask)

    def map(self, fn) -> "ScalarField":
        return ScalarField(self.grid, fn(self.values), self.mask)

    def positive(self) -> bool:
        return bool(np.all(self.values > 0))


@dataclass(frozen=True, eq=False)
class TensorField:
    """Tensor components per node; ``variance`` has one 'u' or 'd' per slot."""

    grid: ChartGrid
    components: np.ndarray
    variance: str
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        rank = len(self.variance)
        if set(self.variance) - {"u", "d"}:
            raise ValueError(f"variance labels must be 'u' or 'd', got {self.variance!r}")
        expected = self.grid.shape + (self.grid.dim,) * rank
        if comps.shape != expected:
            raise ValueError(f"components have shape {comps.shape}, expected {expected}")
        if not np.all(np.isfinite(comps)):
            raise ValueError("tensor field contains non-finite entries")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "mask", _full_mask(self.grid, self.mask))

    @property
    def rank(self) -> int:
        return len(self.variance)

    def __sub__(self, other: "TensorField") -> "TensorField":
        return TensorField(self.grid, self.components - other.components, self.variance,
                           self.mask & other.mask)


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric nondegenerate metric of constant signature on a grid."""

    grid: ChartGrid
    components: np.ndarray
    signature: tuple[int, ...] = None

    def __post_init__(self):
        g = np.asarray(self.components, dtype=float)
        n = self.grid.dim
        if g.shape != self.grid.shape + (n, n):
            raise ValueError(f"metric components have shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("metric contains non-finite entries")
        scale = np.max(np.abs(g), axis=(-1, -2))
        if not np.allclose(g, np.swapaxes(g, -1, -2), rtol=0, atol=1e-12 * np.max(scale)):
            raise ValueError("metric is not symmetric")
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        det = np.linalg.det(g)
        if np.any(np.abs(det) < 1e-12 * scale ** n):
            raise SingularMetricError("metric is degenerate at some node")
        negatives = np.sum(np.linalg.eigvalsh(g) < 0, axis=-1)
        if np.any(negatives != negatives.flat[0]):
            raise ValueError("metric signature varies across the grid")
        sig = tuple([-1] * int(negatives.flat[0]) + [1] * (n - int(negatives.flat[0])))
        if self.signature is not None:
            given = tuple(int(s) for s in self.signature)
            if len(given) != n or sorted(given) != list(sig):
                raise ValueError(f"declared signature {given} does not match metric {sig}")
            sig = given
        object.__setattr__(self, "components", g)
        object.__setattr__(self, "signature", sig)

    @classmethod
    def from_functions(cls, grid: ChartGrid, entries, signature=None) -> "MetricField":
        """Build from an n x n nested list of callables or constants."""
        n = grid.dim
        mesh = grid.mesh()
        g = np.zeros(grid.shape + (n, n))
        for i in range(n):
            for j in range(n):
                e = entries[i][j]
                g[..., i, j] = e(*mesh) if callable(e) else e
        return cls(grid, g, signature)

    @classmethod
    def diagonal(cls, grid: ChartGrid, entries, signature=None) -> "MetricField":
        n = grid.dim
        full = [[entries[i] if i == j else 0.0 for j in range(n)] for i in range(n)]
        return cls.from_functions(grid, full, signature)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.components)

    def det(self) -> np.ndarray:
        return np.linalg.det(self.components)

    def scaled(self, factor: np.ndarray) -> "MetricField":
        """Pointwise conformal rescaling ``factor * g``."""
        return MetricField(self.grid, self.components * np.asarray(factor)[..., None, None],
                           self.signature)


# ---------------------------------------------------------------------------
# stencils

_D1 = {2: ((1, 0.5),), 4: ((1, 2.0 / 3.0), (2, -1.0 / 12.0))}
_D2 = {2: (-2.0, ((1, 1.0),)), 4: (-2.5, ((1, 4.0 / 3.0), (2, -1.0 / 12.0)))}


def _shift(a: np.ndarray, axis: int, s: int) -> np.ndarray:
    # b[i] = a[i + s]; wrapped values only ever land on masked boundary nodes
    return np.roll(a, -s, axis=axis)


def _d1(a: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    out = np.zeros_like(a)
    for s, c in _D1[order]:
        out += c * (_shift(a, axis, s) - _shift(a, axis, -s))
    return out / h


def _d2(a: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    center, wings = _D2[order]
    out = center * a
    for s, c in wings:
        out = out + c * (_shift(a, axis, s) + _shift(a, axis, -s))
    return out / (h * h)


def _edge_mask(grid: ChartGrid, axes: Sequence[int], order: int) -> np.ndarray:
    r = stencil_radius(order)
    mask = np.ones(grid.shape, dtype=bool)
    for ax in set(axes):
        a = grid.axes[ax]
        if a.periodic:
            continue
        if a.count < 2 * r + 1:
            raise ValueError(f"axis {a.name!r} has too few nodes for order {order}")
        idx = [slice(None)] * grid.dim
        idx[ax] = slice(0, r)
        mask[tuple(idx)] = False
        idx[ax] = slice(a.count - r, None)
        mask[tuple(idx)] = False
    return mask


def _check_axis(grid: ChartGrid, axis: int):
    if not 0 <= axis < grid.dim:
        raise IndexError(f"axis {axis} out of range for a {grid.dim}-dimensional grid")


def _zero_outside(arr: np.ndarray, mask: np.ndarray) -> np.ndarray:
    extra = arr.ndim - mask.ndim
    return np.where(mask.reshape(mask.shape + (1,) * extra), arr, 0.0)


def _raw_d1(arr: np.ndarray, grid: ChartGrid, axis: int, order: int) -> np.ndarray:
    return _d1(arr, axis, grid.axes[axis].spacing, order)


def _raw_d2(arr: np.ndarray, grid: ChartGrid, a: int, b: int, order: int) -> np.ndarray:
    if a == b:
        return _d2(arr, a, grid.axes[a].spacing, order)
    return _d1(_d1(arr, a, grid.axes[a].spacing, order), b, grid.axes[b].spacing, order)


def partial_derivative(f, axis: int, order: int = 2):
    """Central difference along one axis; the stencil-radius boundary layer is masked out."""
    grid = f.grid
    _check_axis(grid, axis)
    mask = f.mask & _edge_mask(grid, [axis], order)
    if isinstance(f, ScalarField):
        return ScalarField(grid, _zero_outside(_raw_d1(f.values, grid, axis, order), mask), mask)
    if isinstance(f, TensorField):
        # move the grid axes to the front is already the layout; roll acts on grid axes only
        d = _raw_d1(f.components, grid, axis, order)
        return TensorField(grid, _zero_outside(d, mask), f.variance, mask)
    raise TypeError(f"cannot differentiate {type(f).__name__}")


def second_partial(f: ScalarField, a: int, b: int, order: int = 2) -> ScalarField:
    """Direct second-difference stencil (mixed partials use the product stencil)."""
    grid = f.grid
    _check_axis(grid, a)
    _check_axis(grid, b)
    mask = f.mask & _edge_mask(grid, [a, b], order)
    return ScalarField(grid, _zero_outside(_raw_d2(f.values, grid, a, b, order), mask), mask)


def _first_derivs(arr: np.ndarray, grid: ChartGrid, order: int) -> np.ndarray:
    """Stack d_c arr along a new axis placed right after the grid axes."""
    nd = grid.dim
    return np.stack([_raw_d1(arr, grid, c, order) for c in range(nd)], axis=nd)


def _second_derivs(arr: np.ndarray, grid: ChartGrid, order: int) -> np.ndarray:
    nd = grid.dim
    rows = []
    cache = {}
    for a in range(nd):
        row = []
        for b in range(nd):
            key = (min(a, b), max(a, b))
            if key not in cache:
                cache[key] = _raw_d2(arr, grid, a, b, order)
            row.append(cache[key])
        rows.append(np.stack(row, axis=nd))
    return np.stack(rows, axis=nd)


def _all_edges(grid: ChartGrid, order: int) -> np.ndarray:
    return _edge_mask(grid, range(grid.dim), order)


# ---------------------------------------------------------------------------
# connection and curvature

def _metric_data(g: MetricField, order: int, second: bool):
    ginv = g.inverse()
    dg = _first_derivs(g.components, g.grid, order)          # [..., c, i, j]
    ddg = _second_derivs(g.components, g.grid, order) if second else None
    return ginv, dg, ddg


def _gamma(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # T_kim = d_k g_im + d_i g_km - d_m g_ki
    t = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    return 0.5 * np.einsum("...lm,...kim->...lki", ginv, t)


def christoffel(g: MetricField, order: int = 2) -> TensorField:
    """Levi-Civita symbols Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    ginv, dg, _ = _metric_data(g, order, second=False)
    mask = _all_edges(g.grid, order)
    return TensorField(g.grid, _zero_outside(_gamma(ginv, dg), mask), "udd", mask)


def riemann(g: MetricField, order: int = 2) -> TensorField:
    """R^l_ijk with R(d_j, d_k) d_i = R^l_ijk d_l.

    The derivative of Gamma is expanded analytically in terms of first and second
    metric derivatives so only one stencil application is involved.
    """
    ginv, dg, ddg = _metric_data(g, order, second=True)
    t = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    gam = 0.5 * np.einsum("...lm,...kim->...lki", ginv, t)
    # d_j g^lm = -g^la d_j g_ab g^bm
    dginv = -np.einsum("...la,...jab,...bm->...jlm", ginv, dg, ginv, optimize=True)
    # d_j T_kim
    dt = ddg + np.swapaxes(ddg, -3, -2) - np.moveaxis(ddg, -3, -1)
    dgam = 0.5 * (np.einsum("...jlm,...kim->...jlki", dginv, t, optimize=True)
                  + np.einsum("...lm,...jkim->...jlki", ginv, dt, optimize=True))
    # R^l_ijk = d_j G^l_ki - d_k G^l_ji + G^l_jm G^m_ki - G^l_km G^m_ji
    term = np.einsum("...jlki->...lijk", dgam)
    quad = np.einsum("...ljm,...mki->...lijk", gam, gam, optimize=True)
    r = term - np.swapaxes(term, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    mask = _all_edges(g.grid, order)
    return TensorField(g.grid, _zero_outside(r, mask), "uddd", mask)


def lower_riemann(g: MetricField, rm: TensorField) -> TensorField:
    """R_lijk = g_lm R^m_ijk."""
    low = np.einsum("...lm,...mijk->...lijk", g.components, rm.components)
    return TensorField(g.grid, low, "dddd", rm.mask)


def ricci(g: MetricField, order: int = 2, rm: TensorField | None = None) -> TensorField:
    """Ric_ik = R^j_ijk (trace of Z -> R(Z, Y) X)."""
    rm = riemann(g, order) if rm is None else rm
    ric = np.einsum("...jijk->...ik", rm.components)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    return TensorField(g.grid, ric, "dd", rm.mask)


def scalar_curvature(g: MetricField, order: int = 2, ric: TensorField | None = None) -> ScalarField:
    ric = ricci(g, order) if ric is None else ric
    s = np.einsum("...ij,...ij->...", g.inverse(), ric.components)
    return ScalarField(g.grid, _zero_outside(s, ric.mask), ric.mask)


# ---------------------------------------------------------------------------
# scalar-field operators

def _check_same_grid(g: MetricField, f: ScalarField):
    if f.grid != g.grid:
        raise ValueError("field and metric live on different grids")


def gradient(g: MetricField, f: ScalarField, order: int = 2) -> TensorField:
    """Index-raised differential, grad^i f = g^ij d_j f."""
    _check_same_grid(g, f)
    df = _first_derivs(f.values, g.grid, order)
    mask = f.mask & _all_edges(g.grid, order)
    grad = np.einsum("...ij,...j->...i", g.inverse(), df)
    return TensorField(g.grid, _zero_outside(grad, mask), "u", mask)


def differential(f: ScalarField, order: int = 2) -> TensorField:
    df = _first_derivs(f.values, f.grid, order)
    mask = f.mask & _all_edges(f.grid, order)
    return TensorField(f.grid, _zero_outside(df, mask), "d", mask)


def hessian(g: MetricField, f: ScalarField, order: int = 2,
            gamma: TensorField | None = None) -> TensorField:
    """H_ij = d_i d_j f - Gamma^k_ij d_k f."""
    _check_same_grid(g, f)
    gamma = christoffel(g, order) if gamma is None else gamma
    df = _first_derivs(f.values, g.grid, order)
    ddf = _second_derivs(f.values, g.grid, order)
    h = ddf - np.einsum("...kij,...k->...ij", gamma.components, df)
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    mask = f.mask & gamma.mask
    return TensorField(g.grid, _zero_outside(h, mask), "dd", mask)


def laplace_beltrami(g: MetricField, f: ScalarField, order: int = 2,
                     form: str = "trace", gamma: TensorField | None = None) -> ScalarField:
    """Laplace-Beltrami operator.

    ``form="trace"`` contracts the Hessian with g^ij (one stencil application);
    ``form="divergence"`` uses |g|^{-1/2} d_i(|g|^{1/2} g^ij d_j f) with nested
    first differences, so its valid region is one stencil radius smaller.
    """
    _check_same_grid(g, f)
    if form == "trace":
        h = hessian(g, f, order, gamma)
        lap = np.einsum("...ij,...ij->...", g.inverse(), h.components)
        return ScalarField(g.grid, _zero_outside(lap, h.mask), h.mask)
    if form == "divergence":
        ginv = g.inverse()
        vol = np.sqrt(np.abs(g.det()))
        df = _first_derivs(f.values, g.grid, order)
        flux = vol[..., None] * np.einsum("...ij,...j->...i", ginv, df)
        div = sum(_raw_d1(flux[..., i], g.grid, i, order) for i in range(g.dim))
        mask = f.mask & g.grid.interior(2 * stencil_radius(order))
        return ScalarField(g.grid, _zero_outside(div / vol, mask), mask)
    raise ValueError(f"unknown Laplacian form {form!r}")


def inner(g: MetricField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """g(a, b) for per-node contravariant vectors."""
    return np.einsum("...ij,...i,...j->...", g.components, a, b)


# ---------------------------------------------------------------------------
# comparisons

def pairwise_max(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(values)) if values.size else 0.0


def max_discrepancy(a, b, margin: int | None = None, order: int = 2) -> float:
    """Max |a - b| over nodes valid in both fields and at distance >= 2 stencil radii."""
    av = a.values if isinstance(a, ScalarField) else a.components
    bv = b.values if isinstance(b, ScalarField) else b.components
    margin = 2 * stencil_radius(order) if margin is None else margin
    mask = a.mask & b.mask & a.grid.interior(margin)
    diff = np.abs(av - bv)[mask]
    return pairwise_max(diff)


def field_scale(a, margin: int = 0) -> float:
    av = a.values if isinstance(a, ScalarField) else a.components
    mask = a.mask & a.grid.interior(margin)
    vals = np.abs(av[mask])
    return pairwise_max(vals)


def l2_norm(values: np.ndarray) -> float:
    """Root of a pairwise (fsum) sum of squares."""
    return math.sqrt(math.fsum(np.ravel(np.asarray(values, dtype=float) ** 2)))
