import math

import numpy as np
import pytest
from scipy import integrate, stats

from potkit import (Domain, OperatorSpec, poisson_kernel, stable_exit, wos_exit)
from potkit.errors import SupportError
from potkit.measures import Density, MeasureData
from potkit.solve import integral_solution
from potkit.stochastic import (class_d_diagnostic, maximal_inequality_check,
                               one_sided_stable, reducing_expectation,
                               sample_start_points, stopped_values,
                               symmetric_stable_increments, _rng)

LAP = OperatorSpec.laplacian()
DISK = Domain.ball([0.0, 0.0], 1.0, 2)
EXACT_REDUCING = 3.0 * math.log(2.0) / (8.0 * math.pi)


def test_wos_disk_center_uniform_sectors():
    pts = wos_exit(DISK, [0.0, 0.0], seed=101, n_samples=100_000)
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi)
    counts, _ = np.histogram(ang, bins=16, range=(0.0, 2 * math.pi))
    chi2 = stats.chisquare(counts)
    assert chi2.pvalue > 0.01
    assert abs(pts[:, 0].mean()) < 3.0 * pts[:, 0].std() / math.sqrt(len(pts))


@pytest.mark.parametrize("dim,x", [(2, [0.35, -0.2]), (3, [0.1, 0.4, -0.3])])
def test_wos_ball_exit_harmonic_mean(dim, x):
    # coordinates are harmonic: the exit-point mean must reproduce the start
    dom = Domain.ball([0.0] * dim, 1.0, dim)
    pts = wos_exit(dom, x, seed=7, n_samples=60_000)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-9)
    for k in range(dim):
        se = pts[:, k].std() / math.sqrt(len(pts))
        assert abs(pts[:, k].mean() - x[k]) < 3.5 * se


def test_wos_interval_exact_probability():
    dom = Domain.interval(0.0, 1.0)
    pts = wos_exit(dom, [0.3], seed=5, n_samples=50_000)
    p_right = np.mean(pts[:, 0] > 0.5)
    se = math.sqrt(0.3 * 0.7 / 50_000)
    assert abs(p_right - 0.3) < 3.5 * se


def test_wos_near_boundary_concentrates():
    x = np.array([0.9, 0.0])
    pts = wos_exit(DISK, x, seed=13, n_samples=20_000)
    dist = np.linalg.norm(pts - [1.0, 0.0], axis=1)
    assert dist.mean() < DISK.diameter / 4.0
    # cross-check the mean displacement against Poisson-kernel quadrature
    val, _ = integrate.quad(
        lambda th: poisson_kernel(LAP, DISK, x, [math.cos(th), math.sin(th)])
        * np.linalg.norm([math.cos(th) - 1.0, math.sin(th)]),
        0.0, 2.0 * math.pi, limit=200)
    se = dist.std() / math.sqrt(len(dist))
    assert abs(dist.mean() - val) < 3.5 * se


def test_wos_rectangle_lands_on_boundary():
    dom = Domain.rectangle([(0.0, 1.0), (0.0, 2.0)])
    pts = wos_exit(dom, [0.4, 1.0], seed=3, n_samples=2_000)
    on_face = (np.isclose(pts[:, 0], 0.0) | np.isclose(pts[:, 0], 1.0)
               | np.isclose(pts[:, 1], 0.0) | np.isclose(pts[:, 1], 2.0))
    assert np.all(on_face)


def test_symmetric_stable_characteristic_function():
    rng = _rng(17)
    alpha = 0.7
    x = symmetric_stable_increments(alpha, 200_000, rng)
    for t in (0.5, 1.0, 2.0):
        emp = np.cos(t * x).mean()
        se = np.cos(t * x).std() / math.sqrt(x.size)
        assert abs(emp - math.exp(-abs(t) ** alpha)) < 4.0 * se


def test_one_sided_stable_laplace_transform():
    rng = _rng(23)
    beta = 0.4
    s = one_sided_stable(beta, 200_000, rng)
    assert np.all(s > 0)
    for lam in (0.5, 1.0, 2.0):
        emp = np.exp(-lam * s).mean()
        se = np.exp(-lam * s).std() / math.sqrt(s.size)
        assert abs(emp - math.exp(-lam**beta)) < 4.0 * se


def test_stable_exit_outside_and_symmetric():
    dom = Domain.interval(-1.0, 1.0)
    pts = stable_exit(dom, [0.0], alpha=0.5, dt=1e-3, seed=31, n_samples=20_000)
    z = pts[:, 0]
    assert np.all(np.abs(z) >= 1.0)
    p_right = np.mean(z > 0)
    assert abs(p_right - 0.5) < 3.5 * math.sqrt(0.25 / z.size)


def test_stable_exit_law_total_variation():
    dom = Domain.interval(-1.0, 1.0)
    op = OperatorSpec.fractional(0.5)
    edges = np.linspace(1.0, 3.0, 33)
    expect = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(lambda s: 2.0 * poisson_kernel(op, dom, [0.0], [s]),
                              lo, hi)
        expect.append(v)
    expect.append(1.0 - sum(expect))

    def tv_at(dt, seed):
        pts = stable_exit(dom, [0.0], alpha=0.5, dt=dt, seed=seed,
                          n_samples=20_000)
        z = np.abs(pts[:, 0])
        emp = np.histogram(z, bins=edges)[0] / z.size
        emp = np.append(emp, np.mean(z >= 3.0))
        return 0.5 * float(np.sum(np.abs(emp - np.asarray(expect))))

    tv_fine = tv_at(1e-3, 41)
    tv_coarse = tv_at(2e-2, 41)
    assert tv_fine < 0.05
    assert tv_fine <= tv_coarse + 0.01        # refinement trend


def test_reducing_expectation_benchmark(disk_dirac_solution):
    est = reducing_expectation(disk_dirac_solution, k=4.0, n=1.0,
                               start=[0.5, 0.0], n_samples=50_000, seed=2)
    assert abs(est.value - EXACT_REDUCING) <= 3.0 * est.stderr
    assert est.stderr < 0.004


def test_reducing_expectation_n_at_k_zero(disk_dirac_solution):
    est = reducing_expectation(disk_dirac_solution, k=2.0, n=2.0,
                               start=[0.5, 0.0], n_samples=5_000, seed=2)
    assert est.value == 0.0


def test_reducing_k_trend_and_exhaustion(disk_dirac_solution):
    # estimates increase toward u(x) with k; escape fraction decreases
    vals, fracs = [], []
    for k in (2.0, 4.0, 8.0):
        est = reducing_expectation(disk_dirac_solution, k=k, n=1.0,
                                   start=[0.5, 0.0], n_samples=40_000, seed=9)
        vals.append(est.value)
        fracs.append(est.extra["frac_stopped_before_exit"])
    assert vals[0] < vals[1] < vals[2] + 0.01
    assert fracs[0] > fracs[1] > fracs[2]


def test_reducing_1d_interval():
    dom = Domain.interval(0.0, 1.0)
    mu = MeasureData.make(atoms=[([0.5], 1.0)], dom=dom)
    sol = integral_solution(LAP, dom, mu)
    # u is bounded by 1/4, so any k above it makes tau_k = tau_D and the
    # stopped value vanishes at the boundary
    est = reducing_expectation(sol, k=1.0, n=0.1, start=[0.25],
                               n_samples=2_000, seed=3)
    assert est.value == 0.0
    # a reachable level stops on the level points where u = k
    est2 = reducing_expectation(sol, k=0.2, n=0.1, start=[0.1],
                                n_samples=50_000, seed=3)
    # from x = 0.1: P(hit the sublevel edge before 0) = u(x)/k by the exact
    # two-point exit law; the payoff there is k - n
    u_x = sol.evaluate([0.1])
    expect = (0.2 - 0.1) * u_x / 0.2
    assert abs(est2.value - expect) <= 3.0 * est2.stderr


def test_stopped_values_determinism(disk_dirac_solution):
    a = reducing_expectation(disk_dirac_solution, k=4.0, n=1.0,
                             start=[0.5, 0.0], n_samples=10_000, seed=77)
    b = reducing_expectation(disk_dirac_solution, k=4.0, n=1.0,
                             start=[0.5, 0.0], n_samples=10_000, seed=77)
    assert a.value == b.value
    assert a.stderr == b.stderr


def test_stderr_scaling(disk_dirac_solution):
    # stderr ~ N^{-1/2} within a factor 1.5 across decades
    errs = []
    for N in (1_000, 10_000, 100_000):
        est = reducing_expectation(disk_dirac_solution, k=4.0, n=1.0,
                                   start=[0.5, 0.0], n_samples=N, seed=55)
        errs.append(est.stderr)
    for i in range(2):
        ratio = errs[i] / errs[i + 1]
        assert math.sqrt(10.0) / 1.5 < ratio < math.sqrt(10.0) * 1.5


def test_class_d_estimates_nonincreasing(disk_dirac_solution):
    diag = class_d_diagnostic(disk_dirac_solution, family=[2.0, 4.0],
                              levels=[0.25, 0.5, 1.0],
                              rho=lambda p: np.full(len(p), 1 / math.pi),
                              n_samples=5_000, seed=12)
    assert np.all(np.diff(diag.table, axis=0) <= 1e-12)
    assert diag.verdict == "not-class-D"


def test_class_d_bounded_exact_zeros():
    sol = integral_solution(LAP, DISK, MeasureData(density=Density.constant(1.0)))
    diag = class_d_diagnostic(sol, family=[0.05, 0.1, 0.2],
                              levels=[0.1, 0.3, 0.5],
                              rho=lambda p: np.full(len(p), 1 / math.pi),
                              n_samples=5_000, seed=12)
    assert diag.verdict == "class-D"
    assert np.all(diag.estimates[1:] == 0.0)


def test_maximal_inequality_presets():
    sol = integral_solution(LAP, DISK, MeasureData(density=Density.constant(1.0)))
    est = maximal_inequality_check(sol, d1_value=0.125,
                                   rho=lambda p: np.full(len(p), 1 / math.pi),
                                   n_samples=5_000, seed=8)
    assert est.extra["passed"]
    assert est.extra["bound"] == pytest.approx(2.0 * math.sqrt(0.125))
    dom = Domain.interval(0.0, 1.0)
    soli = integral_solution(LAP, dom, MeasureData.make(atoms=[([0.5], 1.0)],
                                                        dom=dom))
    esti = maximal_inequality_check(soli, d1_value=0.125,
                                    rho=lambda p: np.ones(len(p)),
                                    n_samples=5_000, seed=8)
    assert esti.extra["passed"]


def test_maximal_zero_solution():
    sol = integral_solution(LAP, DISK, MeasureData())
    est = maximal_inequality_check(sol, d1_value=0.0,
                                   rho=lambda p: np.full(len(p), 1 / math.pi),
                                   n_samples=500, seed=8)
    assert est.value == 0.0
    assert est.extra["passed"]


def test_sample_start_points_inside():
    rng = _rng(3)
    pts = sample_start_points(DISK, lambda p: np.full(len(p), 1 / math.pi),
                              5_000, rng)
    assert np.all(DISK.contains(pts))


def test_radial_machinery_guards():
    mu = MeasureData.make(atoms=[([0.3, 0.0], 1.0)], dom=DISK)
    sol = integral_solution(LAP, DISK, mu)
    with pytest.raises(SupportError):
        stopped_values(sol, 2.0, np.array([[0.5, 0.0]]), _rng(1))


def test_stable_walk_start_outside_rejected():
    dom = Domain.interval(-1.0, 1.0)
    with pytest.raises(SupportError):
        stable_exit(dom, [2.0], alpha=0.5, dt=1e-3, seed=1, n_samples=10)
