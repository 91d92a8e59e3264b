"""Constants, parameter validation, grids, and radial profiles."""

import math

import mpmath
import numpy as np
import pytest

from fracsing.core import (
    Constants,
    ParameterError,
    ProblemParams,
    RadialFunction,
    ball_volume,
    constants_for,
    fundamental_constant,
    make_grid,
    pv_constant,
    surface_area,
)

mpmath.mp.dps = 40


def test_surface_area_and_volume_known_dimensions():
    assert surface_area(2) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert surface_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)


def test_fundamental_constant_against_high_precision_route():
    # Independent route: mpmath gamma evaluation at 40 digits.
    for dim, alpha in [(2, 0.75), (2, 0.5), (3, 0.6), (3, 0.25), (4, 0.9)]:
        expected = mpmath.gamma(dim / 2.0 - alpha) / (
            mpmath.mpf(4) ** alpha
            * mpmath.pi ** (dim / 2.0)
            * mpmath.gamma(alpha)
        )
        assert fundamental_constant(dim, alpha) == pytest.approx(
            float(expected), rel=1e-14
        )


def test_fundamental_constant_half_order_closed_forms():
    # alpha = 1/2 collapses to elementary values: 1/(2 pi) in the plane,
    # 1/(2 pi^2) in space.
    assert fundamental_constant(2, 0.5) == pytest.approx(
        1.0 / (2.0 * math.pi), rel=1e-14
    )
    assert fundamental_constant(3, 0.5) == pytest.approx(
        1.0 / (2.0 * math.pi**2), rel=1e-14
    )


def test_pv_constant_against_high_precision_route():
    for dim, alpha in [(2, 0.75), (2, 0.5), (3, 0.6)]:
        expected = (
            mpmath.mpf(4) ** alpha
            * mpmath.gamma(dim / 2.0 + alpha)
            * alpha
            / (mpmath.pi ** (dim / 2.0) * mpmath.gamma(1.0 - alpha))
        )
        assert pv_constant(dim, alpha) == pytest.approx(float(expected), rel=1e-14)
        assert pv_constant(dim, alpha) > 0.0


def test_constants_for_bundles_both():
    c = constants_for(2, 0.75)
    assert isinstance(c, Constants)
    assert c.c_fund == fundamental_constant(2, 0.75)
    assert c.c_pv == pv_constant(2, 0.75)


def test_params_validation_rejects_bad_inputs():
    with pytest.raises(ParameterError):
        ProblemParams(dim=2, alpha=1.0, p=2.0, k=0.0)
    with pytest.raises(ParameterError):
        ProblemParams(dim=2, alpha=0.0, p=2.0, k=0.0)
    with pytest.raises(ParameterError):
        ProblemParams(dim=1, alpha=0.5, p=2.0, k=0.0)
    with pytest.raises(ParameterError):
        ProblemParams(dim=2, alpha=0.75, p=1.0, k=0.0)
    with pytest.raises(ParameterError):
        ProblemParams(dim=2, alpha=0.75, p=2.0, k=-0.1)


def test_params_derived_quantities():
    params = ProblemParams(dim=2, alpha=0.75, p=2.0, k=0.3)
    assert params.critical_p == pytest.approx(4.0, rel=1e-15)
    assert params.subcritical
    assert params.singular_exponent == pytest.approx(-0.5, rel=1e-15)
    assert params.constants.c_fund == fundamental_constant(2, 0.75)

    sup = ProblemParams(dim=2, alpha=0.6, p=6.0, k=0.0)
    assert sup.critical_p == pytest.approx(2.5, rel=1e-15)
    assert not sup.subcritical


def test_with_k_replaces_only_k():
    params = ProblemParams(dim=3, alpha=0.8, p=2.5, k=0.0)
    moved = params.with_k(0.7)
    assert moved.k == 0.7
    assert (moved.dim, moved.alpha, moved.p) == (3, 0.8, 2.5)
    assert params.k == 0.0


def test_grid_weights_recover_ball_volume():
    for dim in (2, 3):
        grid = make_grid(400, dim=dim)
        # weights quadrate |S^{dim-1}| r^{dim-1} dr, so the total mass is
        # the ball volume exactly up to the rule's polynomial precision.
        assert grid.integrate(np.ones(grid.n)) == pytest.approx(
            ball_volume(dim), rel=1e-12
        )


def test_grid_quadrature_matches_antiderivatives():
    grid = make_grid(400, dim=2)
    r = grid.nodes
    # integral over the ball of r^2 is 2 pi / 4; of (1 - r^2) is pi / 2.
    assert grid.integrate(r**2) == pytest.approx(2.0 * math.pi / 4.0, rel=1e-12)
    assert grid.integrate(1.0 - r**2) == pytest.approx(math.pi / 2.0, rel=1e-12)
    # graded mesh handles an integrable singularity r^{-1/2} well.
    exact = 2.0 * math.pi / 1.5
    assert grid.integrate(r**-0.5) == pytest.approx(exact, rel=1e-6)


def test_grid_structure():
    grid = make_grid(400, grading=2.0, dim=2)
    r = grid.nodes
    assert grid.n == 400
    assert np.all(np.diff(r) > 0.0)
    assert 0.0 < r[0] and r[-1] < 1.0
    assert grid.cell_of(0) == 0
    assert grid.cell_of(grid.n - 1) == grid.n_cells - 1
    # grading clusters nodes at the origin: the innermost cell is far
    # shorter than the uniform width.
    widths = np.diff(grid.cell_edges)
    assert widths[0] < 0.1 / grid.n_cells


def test_grid_rejects_bad_sizes():
    with pytest.raises(ParameterError):
        make_grid(0)
    with pytest.raises(ParameterError):
        make_grid(6)  # fewer nodes than a single quadrature cell


def test_radial_function_total_and_arithmetic():
    grid = make_grid(40)
    smooth = np.linspace(1.0, 2.0, grid.n)
    u = RadialFunction(grid, smooth, singular_coeff=0.3, singular_exponent=-0.5)
    assert np.allclose(u.total, smooth + 0.3 * grid.nodes**-0.5)

    v = RadialFunction(grid, np.ones(grid.n))
    s = u + v
    assert s.singular_coeff == pytest.approx(0.3)
    assert np.allclose(s.values, smooth + 1.0)
    d = s - u
    assert d.singular_coeff == 0.0
    assert np.allclose(d.values, 1.0)

    doubled = u.scale(2.0)
    assert doubled.singular_coeff == pytest.approx(0.6)
    with pytest.raises(ParameterError):
        u.scale(-1.0)


def test_radial_function_validation():
    grid = make_grid(40)
    with pytest.raises(ParameterError):
        RadialFunction(grid, np.ones(grid.n), singular_coeff=-1.0,
                       singular_exponent=-0.5)
    with pytest.raises(ParameterError):
        RadialFunction(grid, np.ones(grid.n), singular_coeff=1.0,
                       singular_exponent=0.5)
    other = make_grid(48)
    with pytest.raises(ParameterError):
        RadialFunction(grid, np.ones(grid.n)) + RadialFunction(
            other, np.ones(other.n)
        )
    a = RadialFunction(grid, np.ones(grid.n), 1.0, -0.5)
    b = RadialFunction(grid, np.ones(grid.n), 1.0, -0.25)
    with pytest.raises(ParameterError):
        a + b


def test_radial_function_nonnegativity_slack():
    grid = make_grid(40)
    dip = np.full(grid.n, 1.0)
    dip[3] = -1e-13
    u = RadialFunction(grid, dip)
    assert not u.is_nonnegative()
    assert u.is_nonnegative(slack=1e-12)
    assert RadialFunction.zero(grid).is_nonnegative()
