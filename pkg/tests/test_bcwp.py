import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpcurv import geometry as geo
from warpcurv.bcwp import (
    BcwpFunctions,
    BcwpSpec,
    GeodesicExitError,
    assemble,
    bcwp_connection,
    bcwp_gradient,
    bcwp_hessian,
    bcwp_laplacian,
    bcwp_ricci,
    bcwp_riemann,
    bcwp_scalar,
    geodesic_integrate,
    lift_scalar,
    oracle_checks,
)
from warpcurv.geometry import ChartGrid, MetricField
from warpcurv.samples import random_bcwp_spec


def spec_from(base_entries, fiber_entries, c, w, bcenter, fcenter, h=1e-2, count=9):
    m, k = len(base_entries), len(fiber_entries)
    bg = ChartGrid.centered([f"x{i}" for i in range(m)], bcenter, h, count)
    fg = ChartGrid.centered([f"y{i}" for i in range(k)], fcenter, h, count)
    return BcwpSpec.from_functions(bg, fg, BcwpFunctions(base_entries, fiber_entries, c, w))


def one(*x):
    return 1.0 + 0 * x[0]


def flat(n, sign=1.0):
    return [[sign if i == j else 0.0 for j in range(n)] for i in range(n)]


def interior_max(arr, field, order=2):
    mask = field.mask & field.grid.interior(2 * geo.stencil_radius(order))
    return float(np.max(np.abs(arr[mask])))


class TestAssemble:
    def test_direct_product(self):
        s = spec_from(flat(2), flat(1), one, one, [0, 0], [0])
        g = assemble(s)
        assert np.allclose(g.components, np.eye(3))

    def test_blocks(self):
        s = spec_from(flat(1), [[lambda y: 2 + np.sin(y)]], lambda x: 1.5 + 0 * x, lambda x: np.exp(x),
                      [0.2], [0.1])
        g = assemble(s)
        x = s.grid.mesh()[0]
        y = s.grid.mesh()[1]
        assert np.allclose(g.components[..., 0, 0], 2.25)
        assert np.allclose(g.components[..., 1, 1], np.exp(2 * x) * (2 + np.sin(y)))
        assert np.all(g.components[..., 0, 1] == 0)

    def test_rejects_nonpositive_warp(self):
        with pytest.raises(ValueError):
            spec_from(flat(1), flat(1), one, lambda x: x, [0.0], [0.0])

    def test_rejects_wrong_grid(self):
        bg = ChartGrid.centered(["x"], [0], 0.1, 5)
        other = ChartGrid.centered(["x"], [1], 0.1, 5)
        base = MetricField.diagonal(bg, [1.0])
        with pytest.raises(ValueError):
            BcwpSpec(base, base, other.sample(lambda x: 1 + 0 * x), bg.sample(lambda x: 1 + 0 * x))


class TestFirstOrder:
    def test_gradient_constant_c(self):
        s = spec_from(flat(2), flat(1), lambda x, y: 2 + 0 * x, one, [0, 0], [0])
        phi = s.base.grid.sample(lambda x, y: x + 3 * y)
        rec = bcwp_gradient(s, phi)
        comp = rec.full.components
        assert interior_max(comp[..., 0] - 0.25, rec.full) < 1e-12
        assert interior_max(comp[..., 1] - 0.75, rec.full) < 1e-12
        assert np.all(comp[..., 2] == 0)

    def test_exponential_warp_mixed_connection(self):
        s = spec_from(flat(1), flat(2), one, lambda x: np.exp(x), [0.1], [0, 0])
        gam = bcwp_connection(s, 4).full
        for a in (1, 2):
            assert interior_max(gam.components[..., a, 0, a] - 1, gam, 4) < 1e-8
            assert interior_max(gam.components[..., a, a, 0] - 1, gam, 4) < 1e-8

    def test_product_connection_block_diagonal(self):
        s = spec_from([[lambda x: 1 + x ** 2]], [[lambda y: 2 + np.sin(y)]], one, one, [0.3], [0.2])
        gam = bcwp_connection(s).full.components
        assert np.all(gam[..., 0, 1, :] == 0) and np.all(gam[..., 1, 0, :] == 0)


class TestSecondOrder:
    def test_hessian_of_constant(self):
        s = random_bcwp_spec(np.random.default_rng(1), 2, 1)
        phi = s.base.grid.sample(lambda x, y: 0 * x + 4.0)
        rec = bcwp_hessian(s, phi)
        assert np.max(np.abs(rec.full.components)) == 0

    def test_hessian_mixed_block_zero(self):
        s = random_bcwp_spec(np.random.default_rng(2), 2, 2)
        phi = s.base.grid.sample(lambda x, y: np.sin(x) * np.cos(y))
        rec = bcwp_hessian(s, phi)
        assert np.max(np.abs(rec.full.components[..., :2, 2:])) == 0

    def test_laplacian_trivial(self):
        s = spec_from(flat(2), flat(2), one, one, [0, 0], [0, 0])
        phi = s.base.grid.sample(lambda x, y: x ** 2 + np.sin(y))
        rec = bcwp_laplacian(s, phi)
        x, y = s.grid.mesh()[:2]
        assert interior_max(rec.full.values - (2 - np.sin(y)), rec.full) < 1e-4

    def test_laplacian_m2_c_equals_w(self):
        cw = lambda x, y: np.exp(0.3 * x + 0.1 * y)  # noqa: E731
        s = spec_from(flat(2), flat(2), cw, cw, [0.2, 0.1], [0, 0])
        phi = s.base.grid.sample(lambda x, y: np.sin(x + 2 * y))
        rec = bcwp_laplacian(s, phi)
        base = s.base
        c = s.c.values
        lap_b = geo.laplace_beltrami(base, phi).values
        dphi = geo.differential(phi).components
        dc = geo.differential(s.c).components
        expected = lap_b / c ** 2 + 2 * np.einsum("...i,...i->...", dc, dphi) / c ** 3
        lifted = np.broadcast_to(expected[..., None, None], s.shape)
        assert geo.max_discrepancy(rec.full, geo.ScalarField(s.grid, lifted, rec.full.mask)) < 1e-10
        oracle = geo.laplace_beltrami(assemble(s), lift_scalar(s, phi))
        assert geo.max_discrepancy(rec.full, oracle) < 1e-3

    def test_laplacian_fiber_function(self):
        s = spec_from(flat(1), [[lambda y: 1 + 0.2 * np.sin(y)]], one, lambda x: 1.5 + 0.2 * x, [0.1], [0.3])
        psi = s.fiber.grid.sample(lambda y: np.cos(y))
        rec = bcwp_laplacian(s, None, psi)
        oracle = geo.laplace_beltrami(assemble(s), lift_scalar(s, None, psi))
        assert geo.max_discrepancy(rec.full, oracle) < 1e-3


class TestCurvature:
    def test_flat_trivial_zero(self):
        s = spec_from(flat(2), flat(1), one, one, [0, 0], [0])
        assert np.max(np.abs(bcwp_riemann(s).full.components)) == 0
        assert np.max(np.abs(bcwp_ricci(s).full.components)) == 0

    def test_scalar_of_trivial_product(self):
        sph = [[1.0, 0.0], [0.0, lambda th, ph: np.sin(th) ** 2]]
        s = spec_from(flat(1), sph, one, one, [0.0], [1.2, 0.0], h=1e-2)
        sc = bcwp_scalar(s).full
        assert interior_max(sc.values - 2, sc) < 1e-3

    def test_riemann_zero_blocks(self):
        s = random_bcwp_spec(np.random.default_rng(3), 2, 2)
        rm = bcwp_riemann(s).full.components
        oracle = geo.riemann(assemble(s))
        # R(X,Y)V = 0 for base X, Y and fiber V: R^l_{V X Y} with any l
        assert np.max(np.abs(rm[..., :, 2:, :2, :2])) == 0
        assert interior_max(oracle.components[..., :, 2:, :2, :2], oracle) < 1e-3
        # R(X,Y)Z has no fiber component
        assert np.max(np.abs(rm[..., 2:, :2, :2, :2])) == 0
        assert interior_max(oracle.components[..., 2:, :2, :2, :2], oracle) < 1e-3

    def test_schwarzschild_ricci_flat(self):
        M = 1.0
        u2 = lambda r: 1 - 2 * M / r  # noqa: E731
        base = [[lambda r, t: 1 / u2(r), 0.0], [0.0, lambda r, t: -u2(r)]]
        sph = [[1.0, 0.0], [0.0, lambda th, ph: np.sin(th) ** 2]]
        s = spec_from(base, sph, lambda r, t: 1 + 0 * r, lambda r, t: r, [4.0, 0.0], [1.2, 0.0])
        ric = geo.ricci(assemble(s))
        assert interior_max(ric.components, ric) < 1e-3
        formula = bcwp_ricci(s).full
        assert interior_max(formula.components, formula) < 1e-3


@pytest.mark.parametrize("m,k", [(1, 1), (1, 2), (2, 1), (2, 2)])
@pytest.mark.parametrize("base_sign", [1, -1])
def test_oracle_equivalence(m, k, base_sign):
    s = random_bcwp_spec(np.random.default_rng(10 * m + k), m, k, base_sign=base_sign)
    checks = oracle_checks(s, 1e-3, order=2)
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


def test_oracle_equivalence_order4():
    s = random_bcwp_spec(np.random.default_rng(7), 2, 2)
    checks = oracle_checks(s, 1e-5, order=4)
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2 ** 20), m=st.sampled_from([1, 2]), k=st.sampled_from([1, 2]))
def test_oracle_equivalence_random(seed, m, k):
    s = random_bcwp_spec(np.random.default_rng(seed), m, k)
    checks = oracle_checks(s, 1e-3, order=2, what=["gradient", "connection", "laplacian", "ricci"])
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


class TestGeodesics:
    def test_straight_line(self):
        s = spec_from(flat(1), flat(1), one, one, [0.0], [0.0], h=0.1)
        res = geodesic_integrate(s, [0.0, 0.0], [0.3, 0.1], steps=8)
        t = res.times[:, None]
        assert np.allclose(res.points, t * np.array([0.3, 0.1]), atol=1e-12)
        assert np.max(res.base_residual) < 1e-6 and np.max(res.fiber_residual) < 1e-6

    def test_zero_fiber_velocity(self):
        s = spec_from(flat(2), flat(1), lambda x, y: np.exp(0.2 * x), lambda x, y: 1 + 0.3 * y ** 2,
                      [0, 0], [0.0], h=0.1)
        res = geodesic_integrate(s, [0.0, 0.0, 0.1], [0.2, 0.1, 0.0], steps=10)
        assert np.allclose(res.points[:, 2], 0.1, atol=1e-12)
        assert np.max(res.base_residual) < 1e-4

    def test_clairaut(self):
        s = spec_from(flat(1), flat(1), one, lambda x: x, [1.5], [0.0], h=0.1)
        res = geodesic_integrate(s, [1.5, 0.0], [0.2, 0.1], steps=20)
        assert np.ptp(res.clairaut) < 1e-9 * res.clairaut[0]
        assert np.max(res.fiber_residual) < 1e-4
        assert np.max(res.pregeodesic_defect) < 1e-6

    def test_exit_raises(self):
        s = spec_from(flat(1), flat(1), one, one, [0.0], [0.0], h=0.1)
        with pytest.raises(GeodesicExitError):
            geodesic_integrate(s, [0.0, 0.0], [5.0, 0.0], steps=20)
