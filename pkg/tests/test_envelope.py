import math

import numpy as np
import pytest

from potkit import (Domain, OperatorSpec, assemble, build_grid, d1_norm,
                    discrete_green, fvp_diagnostic, harmonic_extension,
                    reduite, tail_curve)
from potkit.envelope import FVP_FAMILY, envelope_field
from potkit.errors import SupportError
from potkit.geometry import GridField
from potkit.measures import Density, MeasureData
from potkit.solve import integral_solution

LAP = OperatorSpec.laplacian()


def brute_force_envelope(dop, g_flat, iters=400_000, tol=1e-14):
    """Independent oracle: plain value iteration w <- max(g, P w)."""
    P = dop.transition_matrix()
    w = g_flat.copy()
    for _ in range(iters):
        w_new = np.maximum(g_flat, P @ w)
        if np.max(np.abs(w_new - w)) < tol:
            return w_new
        w = w_new
    return w


def test_zero_obstacle(interval_dop):
    res = reduite(interval_dop, interval_dop.grid.new_field())
    assert np.all(res.envelope.values == 0.0)
    assert res.residual <= 1e-12


def test_excessive_obstacle_fixed(interval_dop):
    # a Green column is excessive: it is its own envelope, and the
    # continuation set is everything except the source node
    g = discrete_green(interval_dop, np.array([0.5]))
    res = reduite(interval_dop, g.values, tol=1e-12)
    assert np.max(np.abs(res.envelope.values - g.values)) < 1e-9
    src = interval_dop.grid.nearest_node(0.5)
    cont = res.continuation
    assert not cont[src]
    assert cont.sum() == interval_dop.n - 1


def test_gamblers_ruin_and_brute_force():
    N, j = 48, 17
    grid = build_grid(Domain.interval(0.0, 1.0), 1.0 / N)
    dop = assemble(LAP, grid)
    g = grid.new_field()
    g[grid.nearest_node(j / N)] = 1.0
    res = reduite(dop, g, tol=1e-13)
    i = np.arange(1, N)
    expect = np.minimum(i / j, (N - i) / (N - j))
    got = res.envelope.interior_values()
    assert np.max(np.abs(got - expect)) < 1e-10
    oracle = brute_force_envelope(dop, g[grid.interior_mask])
    assert np.max(np.abs(got - oracle)) < 1e-9


def test_envelope_monotone_in_obstacle(disk_dop_small):
    grid = disk_dop_small.grid
    pts = grid.interior_points()
    g1 = GridField.from_interior(grid, np.maximum(0.2 - pts[:, 0] ** 2, 0.0))
    g2 = GridField.from_interior(grid, np.maximum(0.2 - pts[:, 0] ** 2, 0.0) + 0.1)
    e1 = reduite(disk_dop_small, g1.values).envelope.values
    e2 = reduite(disk_dop_small, g2.values).envelope.values
    assert np.all(e2 >= e1 - 1e-12)


def test_envelope_excessive_and_complementary(disk_dop_small):
    grid = disk_dop_small.grid
    pts = grid.interior_points()
    g = GridField.from_interior(
        grid, np.maximum(0.3 - np.sum(pts**2, axis=1), 0.0))
    res = reduite(disk_dop_small, g.values, tol=1e-12)
    w = res.envelope.interior_values()
    pw = disk_dop_small.p_apply(w)
    assert np.all(w >= pw - 1e-9)                     # discrete excessivity
    assert np.all(w >= g.interior_values() - 1e-12)   # majorant
    assert res.residual < 1e-10                       # complementarity


def test_negative_obstacle_rejected(interval_dop):
    g = interval_dop.grid.new_field()
    g[interval_dop.grid.nearest_node(0.5)] = -1.0
    with pytest.raises(SupportError):
        reduite(interval_dop, g)


def test_infinite_obstacle_capped(interval_dop):
    g = interval_dop.grid.new_field()
    node = interval_dop.grid.nearest_node(0.5)
    g[node] = np.inf
    nb = list(node)
    nb[0] += 1
    g[tuple(nb)] = 0.7
    res = reduite(interval_dop, g)
    assert np.isfinite(res.envelope.values).all()
    assert res.envelope.values[node] == pytest.approx(0.7, abs=1e-9)


def test_d1_norm_of_potential(interval_dop):
    # potentials are their own envelopes: d1 = integral of u against rho,
    # and the trapezoid sum of the interval Green column is exactly 1/8
    g = discrete_green(interval_dop, np.array([0.5]))
    rho = np.ones(interval_dop.n)
    val = d1_norm(interval_dop, g, rho, tol=1e-12)
    assert val == pytest.approx(0.125, abs=1e-10)
    l1 = np.sum(np.abs(g.interior_values())) * interval_dop.grid.h
    assert l1 <= val + 1e-12


def test_d1_norm_axioms(disk_dop_small):
    grid = disk_dop_small.grid
    pts = grid.interior_points()
    u = GridField.from_interior(grid, np.sin(3 * pts[:, 0]) * 0.2)
    v = GridField.from_interior(grid, np.maximum(0.1 - pts[:, 1] ** 2, 0.0))
    rho = np.full(disk_dop_small.n, 1.0 / math.pi)
    tol = 1e-11
    # absolute homogeneity
    du = d1_norm(disk_dop_small, u, rho, tol=tol)
    du3 = d1_norm(disk_dop_small,
                  GridField(grid, -3.0 * u.values), rho, tol=tol)
    assert du3 == pytest.approx(3.0 * du, abs=1e-7)
    # triangle inequality
    uv = GridField(grid, u.values + v.values)
    duv = d1_norm(disk_dop_small, uv, rho, tol=tol)
    dv = d1_norm(disk_dop_small, v, rho, tol=tol)
    assert duv <= du + dv + 1e-8


def test_domination_bound(disk_dop_small):
    # |u| <= R^D nu nodewise implies d1(u) <= <R^D rho, nu> + slack
    grid = disk_dop_small.grid
    mu = MeasureData.make(atoms=[([0.25, 0.0], 1.0), ([-0.3, 0.2], -0.5)],
                          dom=grid.domain)
    nu_flat = np.zeros(disk_dop_small.n)
    from potkit.measures import deposit
    nu_flat = deposit(MeasureData.make(
        atoms=[([0.25, 0.0], 1.0), ([-0.3, 0.2], 0.5)], dom=grid.domain), grid)
    u = disk_dop_small.solve(deposit(mu, grid))
    rho = np.full(disk_dop_small.n, 1.0 / math.pi)
    d1 = d1_norm(disk_dop_small, GridField.from_interior(grid, u), rho, tol=1e-11)
    pot_rho = disk_dop_small.solve(rho)
    bound = float(pot_rho @ nu_flat) * grid.cell_volume()
    assert d1 <= bound + 1e-8


def test_sup_attained_on_continuation_set(disk_dop_small):
    # moving the sup under the integral: the harmonic extension over the
    # solver's continuation set reproduces the envelope, and candidate
    # sublevel sets never beat it
    grid = disk_dop_small.grid
    pts = grid.interior_points()
    u = GridField.from_interior(
        grid, np.abs(np.sin(4 * pts[:, 0]) * np.cos(2 * pts[:, 1])) * 0.3)
    rho = np.full(disk_dop_small.n, 1.0 / math.pi)
    tol = 1e-12
    res = reduite(disk_dop_small, u.values, tol=tol)
    d1 = res.envelope.weighted_sum(rho)
    hv = harmonic_extension(disk_dop_small, res.continuation, u)
    hv_val = float(np.sum(np.maximum(hv.interior_values(),
                                     u.interior_values()) * rho)
                   * grid.cell_volume())
    assert hv_val == pytest.approx(d1, abs=10 * 1e-9)
    for c in (0.05, 0.1, 0.2):
        V = (u.values < c) & grid.interior_mask
        hc = harmonic_extension(disk_dop_small, V, u)
        val = float(np.sum(np.maximum(hc.interior_values(),
                                      u.interior_values()) * rho)
                    * grid.cell_volume())
        assert val <= d1 + 1e-8


def test_tower_and_restriction_small(disk_dop_small):
    import scipy.sparse.linalg as spla
    grid = disk_dop_small.grid
    pts = grid.interior_points()
    rng = np.random.default_rng(5)
    W = np.linalg.norm(pts - [0.1, 0.0], axis=1) < 0.7
    V = np.linalg.norm(pts - [0.1, 0.0], axis=1) < 0.4
    g = GridField.from_interior(grid, np.cos(2 * pts[:, 0]) + 0.5 * pts[:, 1])
    hW = harmonic_extension(disk_dop_small, W, g)
    hVW = harmonic_extension(disk_dop_small, V, hW)
    assert np.max(np.abs(hVW.values - hW.values)) < 1e-10
    # restriction identity for mass inside V
    rhs = np.zeros(disk_dop_small.n)
    inside = np.where(V)[0]
    rhs[inside[rng.integers(len(inside), size=2)]] = 1.0 / grid.cell_volume()
    uW = np.zeros(disk_dop_small.n)
    idxW = np.where(W)[0]
    uW[idxW] = spla.spsolve(disk_dop_small.A[idxW][:, idxW].tocsc(), rhs[idxW])
    uV = np.zeros(disk_dop_small.n)
    idxV = np.where(V)[0]
    uV[idxV] = spla.spsolve(disk_dop_small.A[idxV][:, idxV].tocsc(), rhs[idxV])
    hV = harmonic_extension(disk_dop_small, V,
                            GridField.from_interior(grid, uW))
    resid = (uW - hV.interior_values()) - uV
    assert np.max(np.abs(resid[idxV])) < 1e-10


def test_harmonic_extension_identity(disk_dop_small):
    # harmonic data is returned unchanged
    grid = disk_dop_small.grid
    g = discrete_green(disk_dop_small, np.array([0.5, 0.0]))
    src = grid.flat_of_lattice(grid.nearest_node([0.5, 0.0]))
    V = np.ones(disk_dop_small.n, dtype=bool)
    V[src] = False
    h = harmonic_extension(disk_dop_small, V, g)
    assert np.max(np.abs(h.values - g.values)) < 1e-9


def test_tail_curve_diffuse_exact_zero(disk_dop_small):
    dom = disk_dop_small.grid.domain
    sol = integral_solution(LAP, dom, MeasureData(density=Density.constant(1.0)))
    tc = tail_curve(sol, disk_dop_small, 1.0 / math.pi, [0.25, 0.5, 1.0])
    assert np.all(tc.values == 0.0)
    assert tc.verdict == "diffuse-like"
    assert np.all(np.diff(tc.values) <= 1e-12)


def test_tail_curve_dirac_small_grid(disk_dirac_solution, disk_dop_small):
    tc = tail_curve(disk_dirac_solution, disk_dop_small, 1.0 / math.pi,
                    [0.25, 0.5], tol=1e-10)
    target = 1.0 / (4.0 * math.pi)
    assert tc.verdict == "concentrated-like"
    assert np.all(np.abs(tc.values - target) / target < 0.05)
    assert tc.target == pytest.approx(target, rel=0.05)
    assert np.all(tc.resolvable)


def test_tail_curve_unresolvable_warns(disk_dirac_solution, disk_dop_small):
    with pytest.warns(UserWarning, match="below mesh resolution"):
        tc = tail_curve(disk_dirac_solution, disk_dop_small, 1.0 / math.pi,
                        [0.25, 5.0])
    assert tc.resolvable[0]
    assert not tc.resolvable[1]


def test_envelope_field_uses_discrete_diagonal(disk_dirac_solution, disk_dop_small):
    u_abs, nodes, exts = envelope_field(disk_dirac_solution, disk_dop_small)
    assert len(nodes) == 1
    col = discrete_green(disk_dop_small, np.array([0.0, 0.0]))
    assert u_abs[nodes[0]] == pytest.approx(col.values[nodes[0]], rel=1e-12)
    assert np.isfinite(u_abs[disk_dop_small.grid.interior_mask]).all()


def test_fvp_bounded_finite(disk_dop_small):
    dom = disk_dop_small.grid.domain
    sol = integral_solution(LAP, dom, MeasureData(density=Density.constant(1.0)))
    u = disk_dop_small.grid.new_field()
    u[disk_dop_small.grid.interior_mask] = sol.evaluate(
        disk_dop_small.grid.interior_points())
    rho = np.full(disk_dop_small.n, 1.0 / math.pi)
    res = fvp_diagnostic(disk_dop_small, u, rho, FVP_FAMILY["xlog"])
    assert res.verdict == "finite"
    assert np.all(np.isfinite(res.values))
    # caps beyond the sup change nothing
    assert res.values[-1] == pytest.approx(res.values[-2], rel=1e-9)


def test_fvp_dirac_diverging(disk_dirac_solution, disk_dop_small):
    rho = np.full(disk_dop_small.n, 1.0 / math.pi)
    caps = [0.5, 1.0, 2.0, 4.0, 8.0]
    res = fvp_diagnostic(disk_dop_small, disk_dirac_solution, rho,
                         FVP_FAMILY["xlog"], caps=caps)
    assert res.verdict == "diverging"
    assert np.all(np.diff(res.values) > 0)


def test_fvp_zero():
    grid = build_grid(Domain.interval(0.0, 1.0), 0.125)
    dop = assemble(LAP, grid)
    res = fvp_diagnostic(dop, grid.new_field(), np.ones(dop.n),
                         FVP_FAMILY["xlog"], caps=[1.0, 2.0])
    assert np.all(res.values == 0.0)
