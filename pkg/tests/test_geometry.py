import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpcurv import geometry as geo
from warpcurv.geometry import Axis, ChartGrid, MetricField, ScalarField, SingularMetricError


def interior(f, order=2):
    return f.mask & f.grid.interior(2 * geo.stencil_radius(order))


def sphere(h=1e-3, count=9, radius=1.0, center=(1.2, 0.0)):
    grid = ChartGrid.centered(["th", "ph"], center, h, count)
    return MetricField.diagonal(grid, [radius ** 2, lambda th, ph: radius ** 2 * np.sin(th) ** 2])


class TestGrid:
    def test_axis_rejects_short_or_flat(self):
        with pytest.raises(ValueError):
            Axis("x", 0.0, 0.1, 4)
        with pytest.raises(ValueError):
            Axis("x", 0.0, 0.0, 9)

    def test_duplicate_names(self):
        with pytest.raises(ValueError):
            ChartGrid((Axis("x", 0, 1, 5), Axis("x", 0, 1, 5)))

    def test_centered_middle_node(self):
        g = ChartGrid.centered(["x", "y"], [0.3, -0.2], 0.1, 7)
        x, y = g.mesh()
        assert x[3, 3] == pytest.approx(0.3)
        assert y[3, 3] == pytest.approx(-0.2)

    def test_interior_too_short(self):
        g = ChartGrid.uniform(["x"], [0.0], 0.1, 5)
        with pytest.raises(ValueError):
            g.interior(4)


class TestMetricValidation:
    def test_singular(self):
        g = ChartGrid.uniform(["x", "y"], [0, 0], 0.1, 5)
        with pytest.raises(SingularMetricError):
            MetricField.from_functions(g, [[1.0, 1.0], [1.0, 1.0]])

    def test_asymmetric(self):
        g = ChartGrid.uniform(["x", "y"], [0, 0], 0.1, 5)
        with pytest.raises(ValueError):
            MetricField.from_functions(g, [[1.0, 0.5], [0.0, 1.0]])

    def test_signature_detected(self):
        g = ChartGrid.uniform(["t", "x"], [0, 0], 0.1, 5)
        m = MetricField.diagonal(g, [-1.0, 1.0])
        assert sorted(m.signature) == [-1, 1]

    def test_declared_signature_mismatch(self):
        g = ChartGrid.uniform(["t", "x"], [0, 0], 0.1, 5)
        with pytest.raises(ValueError):
            MetricField.diagonal(g, [-1.0, 1.0], signature=[1, 1])


class TestPartialDerivative:
    @pytest.mark.parametrize("order", [2, 4])
    def test_quadratic_exact(self, order):
        g = ChartGrid.uniform(["x"], [-1.0], 0.1, 21)
        f = g.sample(lambda x: x ** 2)
        d = geo.partial_derivative(f, 0, order)
        x = g.mesh()[0]
        assert np.max(np.abs(d.values - 2 * x)[d.mask]) < 1e-12

    def test_quartic_exact_order4(self):
        g = ChartGrid.uniform(["x"], [-1.0], 0.1, 21)
        f = g.sample(lambda x: x ** 4 - x ** 3)
        d = geo.partial_derivative(f, 0, 4)
        x = g.mesh()[0]
        assert np.max(np.abs(d.values - (4 * x ** 3 - 3 * x ** 2))[d.mask]) < 1e-12

    def test_constant(self):
        g = ChartGrid.uniform(["x", "y"], [0, 0], 0.1, 7)
        d = geo.partial_derivative(g.sample(lambda x, y: 3.0 + 0 * x), 1)
        assert np.all(d.values[d.mask] == 0)

    def test_sin_order4(self):
        g = ChartGrid.centered(["x"], [0.4], 1e-3, 11)
        d = geo.partial_derivative(g.sample(np.sin), 0, 4)
        assert np.max(np.abs(d.values - np.cos(g.mesh()[0]))[d.mask]) < 1e-10

    def test_boundary_masked(self):
        g = ChartGrid.uniform(["x"], [0.0], 0.1, 9)
        d = geo.partial_derivative(g.sample(np.sin), 0, 4)
        assert not d.mask[0] and not d.mask[1] and d.mask[2]

    def test_axis_out_of_range(self):
        g = ChartGrid.uniform(["x"], [0.0], 0.1, 9)
        with pytest.raises(IndexError):
            geo.partial_derivative(g.sample(np.sin), 1)

    def test_second_partial_direct(self):
        g = ChartGrid.centered(["x", "y"], [0.2, 0.1], 1e-2, 9)
        f = g.sample(lambda x, y: np.sin(x) * np.cos(y))
        d = geo.second_partial(f, 0, 1, 4)
        x, y = g.mesh()
        assert np.max(np.abs(d.values + np.cos(x) * np.sin(y))[d.mask]) < 1e-9


class TestConnectionAndCurvature:
    def test_flat_christoffel_zero(self):
        g = MetricField.diagonal(ChartGrid.uniform(["x", "y"], [0, 0], 0.1, 7), [1.0, 1.0])
        assert np.all(geo.christoffel(g).components == 0)

    def test_lorentzian_flat(self):
        g = MetricField.diagonal(ChartGrid.uniform(["t", "x"], [0, 0], 0.1, 7), [-1.0, 1.0])
        assert np.all(geo.christoffel(g).components == 0)
        assert np.all(geo.riemann(g).components == 0)

    def test_polar(self):
        grid = ChartGrid.centered(["r", "th"], [2.0, 0.3], 1e-3, 9)
        g = MetricField.diagonal(grid, [1.0, lambda r, th: r ** 2])
        gam = geo.christoffel(g, 4)
        r = grid.mesh()[0]
        m = interior(gam, 4)
        assert np.max(np.abs(gam.components[..., 0, 1, 1] + r)[m]) < 1e-9
        assert np.max(np.abs(gam.components[..., 1, 0, 1] - 1 / r)[m]) < 1e-9
        assert np.max(np.abs(gam.components[..., 1, 1, 0] - 1 / r)[m]) < 1e-9

    @pytest.mark.parametrize("order", [2, 4])
    def test_sphere_riemann(self, order):
        g = sphere()
        rm = geo.lower_riemann(g, geo.riemann(g, order))
        th = g.grid.mesh()[0]
        m = interior(rm, order)
        assert np.max(np.abs(rm.components[..., 0, 1, 0, 1] - np.sin(th) ** 2)[m]) < 1e-4
        # antisymmetry in the last pair of the (1,3) tensor
        raw = geo.riemann(g, order).components
        assert np.max(np.abs(raw + np.swapaxes(raw, -1, -2))) < 1e-12

    @pytest.mark.parametrize("order,tol", [(2, 1e-4), (4, 1e-8)])
    def test_sphere_scalar(self, order, tol):
        g = sphere()
        s = geo.scalar_curvature(g, order)
        assert np.max(np.abs(s.values - 2.0)[interior(s, order)]) < tol

    @pytest.mark.parametrize("radius", [0.5, 2.0, 3.0])
    def test_sphere_radius_scaling(self, radius):
        g = sphere(radius=radius)
        s = geo.scalar_curvature(g, 4)
        assert np.max(np.abs(s.values - 2 / radius ** 2)[interior(s, 4)]) < 1e-7

    def test_flat_torus(self):
        grid = ChartGrid.uniform(["x", "y"], [0, 0], 2 * np.pi / 16, 16, periodic=True)
        g = MetricField.diagonal(grid, [1.0, 1.0])
        assert np.all(geo.ricci(g).components == 0)
        assert np.all(geo.scalar_curvature(g).values == 0)

    def test_product_of_flat_factors(self):
        grid = ChartGrid.centered(["a", "b", "c"], [0, 0, 0], 0.1, 7)
        g = MetricField.diagonal(grid, [1.0, -1.0, 1.0])
        assert np.all(geo.riemann(g).components == 0)

    def test_ricci_symmetric(self):
        grid = ChartGrid.centered(["x", "y", "z"], [0.1, 0.2, 0.3], 1e-2, 9)
        g = MetricField.from_functions(grid, [
            [lambda x, y, z: 1 + 0.2 * np.sin(x + z), 0.1, lambda x, y, z: 0.05 * np.cos(y)],
            [0.1, lambda x, y, z: 1.3 + 0.1 * x * y, 0.0],
            [lambda x, y, z: 0.05 * np.cos(y), 0.0, lambda x, y, z: 0.9 + 0.1 * np.cos(z)],
        ])
        ric = geo.ricci(g)
        assert np.max(np.abs(ric.components - np.swapaxes(ric.components, -1, -2))) < 1e-12
        gam = geo.christoffel(g).components
        assert np.max(np.abs(gam - np.swapaxes(gam, -1, -2))) < 1e-12

    def test_convergence_order2(self):
        errs = []
        for h in (4e-2, 2e-2, 1e-2):
            g = sphere(h=h)
            s = geo.scalar_curvature(g, 2)
            errs.append(np.max(np.abs(s.values - 2.0)[interior(s)]))
        for a, b in zip(errs, errs[1:]):
            assert a / b > 3.5


class TestOperators:
    def test_flat_paraboloid(self):
        grid = ChartGrid.centered(["x", "y"], [0.3, -0.1], 0.1, 9)
        g = MetricField.diagonal(grid, [1.0, 1.0])
        f = grid.sample(lambda x, y: x ** 2 + y ** 2)
        lap = geo.laplace_beltrami(g, f)
        hes = geo.hessian(g, f)
        assert np.max(np.abs(lap.values - 4)[lap.mask]) < 1e-10
        assert np.max(np.abs(hes.components - 2 * np.eye(2))[hes.mask]) < 1e-10

    @pytest.mark.parametrize("form", ["trace", "divergence"])
    def test_lorentzian_sign_flip(self, form):
        grid = ChartGrid.centered(["x"], [0.7], 1e-3, 11)
        g = MetricField.diagonal(grid, [-1.0])
        f = grid.sample(np.sin)
        lap = geo.laplace_beltrami(g, f, 4, form=form)
        assert np.max(np.abs(lap.values - np.sin(grid.mesh()[0]))[interior(lap, 4)]) < 1e-7

    def test_constant_field(self):
        grid = ChartGrid.centered(["x", "y"], [0, 0], 0.1, 9)
        g = MetricField.diagonal(grid, [1.0, lambda x, y: 1 + x ** 2])
        f = grid.sample(lambda x, y: 2.0 + 0 * x)
        assert np.all(geo.gradient(g, f).components == 0)
        assert np.all(geo.hessian(g, f).components == 0)
        assert np.all(geo.laplace_beltrami(g, f).values == 0)

    def test_trace_and_divergence_agree(self):
        grid = ChartGrid.centered(["x", "y"], [0.2, 0.4], 1e-2, 11)
        g = MetricField.diagonal(grid, [lambda x, y: 1 + 0.3 * np.sin(y), lambda x, y: np.exp(0.2 * x)])
        f = grid.sample(lambda x, y: np.cos(x) * np.sin(2 * y))
        a = geo.laplace_beltrami(g, f, 4, form="trace")
        b = geo.laplace_beltrami(g, f, 4, form="divergence")
        assert geo.max_discrepancy(a, b, order=4) < 1e-6


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3), order=st.sampled_from([2, 4]))
def test_stencils_exact_on_quadratics(a, b, c, order):
    g = ChartGrid.uniform(["x"], [-0.5], 0.1, 11)
    f = g.sample(lambda x: a * x ** 2 + b * x + c)
    d1 = geo.partial_derivative(f, 0, order)
    d2 = geo.second_partial(f, 0, 0, order)
    x = g.mesh()[0]
    scale = 1 + abs(a) + abs(b)
    assert np.max(np.abs(d1.values - (2 * a * x + b))[d1.mask]) < 1e-12 * scale * 10
    assert np.max(np.abs(d2.values - 2 * a)[d2.mask]) < 1e-10 * scale


@settings(max_examples=15, deadline=None)
@given(s=st.sampled_from([-1.0, 1.0]), t=st.floats(0.2, 1.2))
def test_definite_factor_sign_flips_laplacian(s, t):
    grid = ChartGrid.centered(["x", "y"], [t, 0.1], 1e-2, 9)
    g = MetricField.diagonal(grid, [s, 1.0])
    f = grid.sample(lambda x, y: np.sin(x) + 0 * y)
    lap = geo.laplace_beltrami(g, f, 4)
    assert np.max(np.abs(lap.values + s * np.sin(grid.mesh()[0]))[lap.mask]) < 1e-7
