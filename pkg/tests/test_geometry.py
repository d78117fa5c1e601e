import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_divfree, random_zero_trace
from mhd2d.geometry import (
    Grid,
    ScalarBC,
    ScalarField,
    VectorBC,
    VectorField,
    convect,
    divergence,
    gradient,
    identity_residuals,
    inner,
    l2_norm_sq,
    laplacian,
)


def test_grid_invariants():
    g = Grid(8, 16)
    assert g.dx * g.nx == 1.0
    assert g.dy * g.ny == 1.0
    with pytest.raises(ValueError):
        Grid(3, 8)


def test_field_shape_errors():
    g = Grid(8, 8)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((7, 8)))
    with pytest.raises(ValueError):
        VectorField(g, np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(ValueError):
        ScalarField(g, np.full((8, 8), np.nan))


def test_divergence_constant_field():
    g = Grid(8, 8)
    v = VectorField(g, np.ones(g.shape_xface()), np.ones(g.shape_yface()))
    assert np.allclose(divergence(v).values, 0.0)


def test_divergence_linear_field_exact():
    g = Grid(12, 12)
    v = VectorField.from_functions(g, lambda x, y: x, lambda x, y: -y)
    assert np.max(np.abs(divergence(v).values)) < 1e-13


def test_divergence_refinement():
    errs = []
    for nx in (32, 64):
        g = Grid(nx, nx)
        v = VectorField.from_functions(g, lambda x, y: np.sin(np.pi * x), lambda x, y: 0 * x)
        d = divergence(v).values
        xc = g.xc()[:, None]
        exact = np.pi * np.cos(np.pi * xc) * np.ones((1, g.ny))
        errs.append(np.sqrt(g.dx * g.dy * np.sum((d - exact) ** 2)))
    assert errs[0] / errs[1] >= 3.5


def test_gradient_constant_and_linear():
    g = Grid(10, 10)
    s = ScalarField(g, np.full(g.shape_center(), 2.5))
    gv = gradient(s)
    assert np.allclose(gv.x, 0.0) and np.allclose(gv.y, 0.0)
    s = ScalarField.from_function(g, lambda x, y: x)
    gv = gradient(s)
    assert np.max(np.abs(gv.x[1:-1, :] - 1.0)) < 1e-13


def test_gradient_divergence_adjoint(rng):
    g = Grid(12, 12)
    s = ScalarField(g, rng.standard_normal(g.shape_center()))
    v = random_zero_trace(g, rng)
    lhs = inner(gradient(s), v)
    rhs = -g.dx * g.dy * float(np.sum(s.values * divergence(v).values))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_laplacian_linear_and_quadratic_exact():
    g = Grid(8, 8)
    s = ScalarField.from_function(g, lambda x, y: 3 * x - 2 * y + 1)
    bc = ScalarBC.from_function(g, lambda x, y: 3 * x - 2 * y + 1)
    assert np.max(np.abs(laplacian(s, bc).values)) < 1e-11
    s = ScalarField.from_function(g, lambda x, y: x**2)
    bc = ScalarBC.from_function(g, lambda x, y: x**2)
    assert np.max(np.abs(laplacian(s, bc).values - 2.0)) < 1e-10


def test_laplacian_refinement():
    errs = []
    for nx in (32, 64):
        g = Grid(nx, nx)
        f = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
        s = ScalarField.from_function(g, f)
        lap = laplacian(s, ScalarBC.zero(g))
        err = lap.values + 2 * np.pi**2 * s.values
        errs.append(np.sqrt(g.dx * g.dy * np.sum(err**2)))
    assert errs[0] / errs[1] >= 3.5


def test_laplacian_requires_matching_bc():
    g = Grid(8, 8)
    with pytest.raises(ValueError):
        laplacian(ScalarField.zeros(g), VectorBC.zero(g))
    with pytest.raises(ValueError):
        laplacian(VectorField.zeros(g), ScalarBC.zero(g))


def test_convect_zero_advecting_field():
    g = Grid(8, 8)
    f = VectorField.from_functions(g, lambda x, y: x * y, lambda x, y: x + y)
    out = convect(VectorField.zeros(g), f, VectorBC.zero(g))
    assert np.allclose(out.x, 0.0) and np.allclose(out.y, 0.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_convect_skew_symmetry(seed):
    rng = np.random.default_rng(seed)
    g = Grid(12, 12)
    a = random_divfree(g, rng)
    f = random_zero_trace(g, rng)
    val = inner(convect(a, f), f)
    scale = np.sqrt(l2_norm_sq(a)) * l2_norm_sq(f)
    assert abs(val) <= 1e-10 * max(1.0, scale)


def test_convect_analytic_derivative():
    errs = []
    for nx in (32, 64):
        g = Grid(nx, nx)
        a = VectorField(g, np.ones(g.shape_xface()), np.zeros(g.shape_yface()))
        fx = lambda x, y: np.sin(np.pi * x)
        f = VectorField.from_functions(g, fx, lambda x, y: 0 * x)
        fbc = VectorBC.from_functions(g, fx, lambda x, y: 0 * x)
        c = convect(a, f, fbc)
        exact = np.pi * np.cos(np.pi * g.xf())[1:-1][:, None]
        errs.append(np.max(np.abs(c.x[1:-1, :] - exact)))
    assert errs[0] / errs[1] >= 3.5


def _smooth_pair(grid):
    bx = lambda x, y: np.sin(np.pi * y) + 0.3 * np.cos(np.pi * x) * np.sin(2 * np.pi * y)
    by = lambda x, y: np.sin(np.pi * x) + 0.2 * np.sin(2 * np.pi * x) * np.cos(np.pi * y)
    ux = lambda x, y: np.cos(np.pi * x) * np.sin(np.pi * y)
    uy = lambda x, y: -np.sin(np.pi * x) * np.cos(np.pi * y)
    return (
        VectorField.from_functions(grid, bx, by),
        VectorBC.from_functions(grid, bx, by),
        VectorField.from_functions(grid, ux, uy),
        VectorBC.from_functions(grid, ux, uy),
    )


def test_identity_residuals_zero_field():
    g = Grid(8, 8)
    res = identity_residuals(VectorField.zeros(g), VectorBC.zero(g), VectorField.zeros(g), VectorBC.zero(g))
    assert all(v == 0.0 for v in res.values())


def test_identity_residuals_constant_field():
    g = Grid(8, 8)
    c1, c2 = 1.3, -0.4
    b = VectorField(g, np.full(g.shape_xface(), c1), np.full(g.shape_yface(), c2))
    bc = VectorBC.from_functions(g, lambda x, y: c1 + 0 * x, lambda x, y: c2 + 0 * x)
    res = identity_residuals(b, bc, VectorField.zeros(g), VectorBC.zero(g))
    assert res["lorentz"] < 1e-12


def test_identity_residuals_second_order():
    r32 = identity_residuals(*_smooth_pair(Grid(32, 32)))
    r64 = identity_residuals(*_smooth_pair(Grid(64, 64)))
    for key in r32:
        assert r32[key] / r64[key] >= 3.5, key
