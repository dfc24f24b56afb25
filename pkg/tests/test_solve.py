import math

import numpy as np
import pytest
from scipy import integrate

from potkit import Domain, OperatorSpec, build_grid, green, integral_solution, potential
from potkit.kernels import frac_torsion_constant
from potkit.measures import Density, MeasureData
from potkit.solve import l1_rho_norm

LAP = OperatorSpec.laplacian()


def test_interval_dirac_value():
    dom = Domain.interval(0.0, 1.0)
    mu = MeasureData.make(atoms=[([0.5], 1.0)], dom=dom)
    sol = integral_solution(LAP, dom, mu)
    assert sol.evaluate([0.25]) == pytest.approx(0.125, abs=1e-15)


def test_disk_dirac_profile(disk_dirac_solution):
    val = disk_dirac_solution.evaluate([0.5, 0.0])
    assert val == pytest.approx(math.log(2.0) / (2.0 * math.pi), rel=1e-12)
    # radial: distance only
    assert disk_dirac_solution.evaluate([0.0, 0.5]) == pytest.approx(val, rel=1e-12)
    # vanishes off the domain, +inf at the concentrated atom
    assert disk_dirac_solution.evaluate([2.0, 0.0]) == 0.0
    assert np.isinf(disk_dirac_solution.evaluate([0.0, 0.0]))


def test_zero_measure():
    dom = Domain.interval(0.0, 1.0)
    sol = integral_solution(LAP, dom, MeasureData())
    x = np.linspace(0.05, 0.95, 7).reshape(-1, 1)
    assert np.allclose(sol.evaluate(x), 0.0)


def test_potential_disk_uniform():
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    pot = potential(LAP, dom, Density.constant(1.0 / math.pi))
    assert pot([0.0, 0.0]) == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-12)


def test_potential_interval_unit():
    dom = Domain.interval(0.0, 1.0)
    pot = potential(LAP, dom, Density.constant(1.0))
    assert pot([0.5]) == pytest.approx(0.125, rel=1e-12)
    assert pot([0.25]) == pytest.approx(0.25 * 0.75 / 2.0, rel=1e-12)


def test_linearity_closed_path():
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    m1 = MeasureData.make(atoms=[([0.3, 0.0], 1.0)], dom=dom)
    m2 = MeasureData.make(atoms=[([-0.2, 0.4], -0.5)], dom=dom)
    m12 = MeasureData.make(atoms=[([0.3, 0.0], 1.0), ([-0.2, 0.4], -0.5)], dom=dom)
    pts = np.array([[0.0, 0.0], [0.5, 0.1], [-0.4, -0.4]])
    u1 = integral_solution(LAP, dom, m1).evaluate(pts)
    u2 = integral_solution(LAP, dom, m2).evaluate(pts)
    u12 = integral_solution(LAP, dom, m12).evaluate(pts)
    assert np.allclose(u12, u1 + u2, rtol=1e-13)


def test_linearity_discrete_path():
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    grid = build_grid(dom, 2.0**-4)
    m1 = MeasureData.make(atoms=[([0.25, 0.0], 1.0)], dom=dom)
    m2 = MeasureData(density=Density.constant(1.0))
    m12 = MeasureData.make(atoms=[([0.25, 0.0], 1.0)],
                           density=Density.constant(1.0), dom=dom)
    u1 = integral_solution(LAP, dom, m1, grid=grid, prefer="grid").grid_field
    u2 = integral_solution(LAP, dom, m2, grid=grid, prefer="grid").grid_field
    u12 = integral_solution(LAP, dom, m12, grid=grid, prefer="grid").grid_field
    assert np.max(np.abs(u12.values - u1.values - u2.values)) < 1e-10


def test_positivity_discrete():
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    grid = build_grid(dom, 2.0**-4)
    mu = MeasureData.make(atoms=[([0.25, 0.25], 2.0)],
                          density=Density.constant(0.5), dom=dom)
    sol = integral_solution(LAP, dom, mu, grid=grid, prefer="grid")
    assert np.all(sol.grid_field.values >= -1e-14)


def test_bounded_density_bound():
    # |u| <= ||R^D 1||_inf ||f||_inf = f_max / 4 on the unit disk
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    dens = Density.gaussian(3.0, 0.4, [0.0, 0.0])
    sol = integral_solution(LAP, dom, MeasureData(density=dens))
    r = np.linspace(0.0, 0.99, 50)
    pts = np.column_stack([r, np.zeros_like(r)])
    vals = sol.evaluate(pts)
    assert np.all(np.abs(vals) <= 3.0 / 4.0 + 1e-12)
    assert np.all(vals >= 0)


def test_domination_transfer():
    # |mu| <= nu componentwise implies |u_mu| <= R^D nu on nodes
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    grid = build_grid(dom, 2.0**-4)
    mu = MeasureData.make(atoms=[([0.25, 0.0], 1.0), ([-0.3, 0.2], -0.7)], dom=dom)
    nu = MeasureData.make(atoms=[([0.25, 0.0], 1.0), ([-0.3, 0.2], 0.7)], dom=dom)
    u = integral_solution(LAP, dom, mu, grid=grid, prefer="grid").grid_field
    Rnu = integral_solution(LAP, dom, nu, grid=grid, prefer="grid").grid_field
    assert np.all(np.abs(u.values) <= Rnu.values + 1e-12)


def test_gaussian_radial_potential_oracle():
    # independent check: R^D f (x0) by direct quadrature of the kernel
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    dens = Density.gaussian(1.0, 0.35, [0.0, 0.0])
    sol = integral_solution(LAP, dom, MeasureData(density=dens))
    x0 = np.array([0.4, 0.0])

    def integrand(r, th):
        y = np.array([r * math.cos(th), r * math.sin(th)])
        return green(LAP, dom, x0, y) * float(dens(y.reshape(1, -1))[0]) * r

    val, _ = integrate.dblquad(integrand, 0.0, 2.0 * math.pi,
                               lambda _: 0.0, lambda _: 1.0, epsabs=1e-10)
    assert sol.evaluate(x0) == pytest.approx(val, rel=5e-6)


def test_fractional_constant_density_closed_form():
    alpha = 0.5
    op = OperatorSpec.fractional(alpha)
    dom = Domain.interval(-1.0, 1.0)
    sol = integral_solution(op, dom, MeasureData(density=Density.constant(1.0)))
    C = frac_torsion_constant(alpha, 1)
    for x in (0.0, 0.6):
        assert sol.evaluate([x]) == pytest.approx(
            (1.0 - x * x) ** (alpha / 2.0) / C, rel=1e-12)


def test_discrete_interpolation_matches_nodes():
    dom = Domain.ball([0.0, 0.0], 1.0, 2)
    grid = build_grid(dom, 2.0**-4)
    mu = MeasureData(density=Density.constant(1.0))
    sol = integral_solution(LAP, dom, mu, grid=grid, prefer="grid")
    pts = grid.interior_points()[::17]
    direct = sol.grid_field.values[grid.interior_mask][::17]
    assert np.allclose(sol.evaluate(pts), direct, atol=1e-12)


def test_l1_rho_norm_matches_quadrature(disk_dirac_solution):
    grid = build_grid(disk_dirac_solution.dom, 2.0**-5)
    rho = np.full(grid.n_interior, 1.0 / math.pi)
    val = l1_rho_norm(disk_dirac_solution, rho, grid)
    assert val == pytest.approx(1.0 / (4.0 * math.pi), rel=0.05)
