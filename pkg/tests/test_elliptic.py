"""Steady p-Laplace solves: torsion profiles and the first eigenpair.

Closed-form oracles: on an interval of radius R the unit-source profile is
((p-1)/p) (R^(p/(p-1)) - |x - c|^(p/(p-1))) plus the boundary lift, and the
first eigenvalue is (p-1) (pi_p / L)^p with pi_p = 2 pi / (p sin(pi/p)),
checked independently by shooting.
"""
import math

import numpy as np
import pytest

from fastdiff import ConfigError, Grid
from fastdiff.elliptic import (
    first_eigenpair,
    rayleigh_quotient,
    solve_plaplace_dirichlet,
    solve_torsion,
)


def torsion_exact(p, x, x_lo, x_hi, delta0=0.0):
    c = 0.5 * (x_lo + x_hi)
    R = 0.5 * (x_hi - x_lo)
    e = p / (p - 1.0)
    return delta0 + (p - 1.0) / p * (R**e - np.abs(x - c) ** e)


def lam1_exact(p, L=1.0):
    pi_p = 2.0 * math.pi / (p * math.sin(math.pi / p))
    return (p - 1.0) * (pi_p / L) ** p


# ---------------------------------------------------------------- torsion

@pytest.mark.parametrize("p", [1.2, 1.5, 1.8])
def test_torsion_matches_closed_form(p):
    grid = Grid(-1.0, 1.0, 1024)
    sol = solve_torsion(p, 0.0, grid)
    exact = torsion_exact(p, grid.interior_nodes, -1.0, 1.0)
    assert float(np.max(np.abs(sol.phi.interior_values - exact))) <= 1e-4
    assert sol.sup == pytest.approx((p - 1.0) / p, abs=1e-4)


def test_torsion_small_interval_oracle():
    # R = 1/2, p = 1.5: sup = (1/3) (1/2)^3 = 1/24.
    grid = Grid(0.0, 1.0, 512)
    sol = solve_torsion(1.5, 0.0, grid)
    assert sol.sup == pytest.approx(1.0 / 24.0, abs=1e-5)


def test_torsion_boundary_lift_is_a_constant_shift():
    grid = Grid(0.0, 1.0, 128)
    base = solve_torsion(1.5, 0.0, grid)
    lifted = solve_torsion(1.5, 0.3, grid)
    assert lifted.boundary_value == 0.3
    diff = lifted.phi.interior_values - base.phi.interior_values
    assert np.allclose(diff, 0.3, atol=1e-8)


def test_torsion_symmetric_and_concave():
    grid = Grid(-1.0, 1.0, 256)
    vals = solve_torsion(1.5, 0.0, grid).phi.interior_values
    assert np.allclose(vals, vals[::-1], atol=1e-9)
    # Discrete second difference nonpositive away from roundoff.
    assert np.max(vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) <= 1e-12


@pytest.mark.parametrize("p", [1.2, 1.5, 1.8])
def test_torsion_sup_grows_with_domain(p):
    sups = [
        solve_torsion(p, 0.0, Grid(0.0, L, 256)).sup
        for L in (0.5, 1.0, 2.0)
    ]
    assert sups[0] < sups[1] < sups[2]


def test_torsion_rejects_negative_lift():
    with pytest.raises(ConfigError):
        solve_torsion(1.5, -0.1, Grid(0.0, 1.0, 64))


# ---------------------------------------------------------------- dirichlet solve

def test_plaplace_rejects_bad_rhs():
    grid = Grid(0.0, 1.0, 64)
    with pytest.raises(ConfigError):
        solve_plaplace_dirichlet(1.5, np.ones(10), grid)
    with pytest.raises(ConfigError):
        solve_plaplace_dirichlet(1.5, np.full(grid.n_interior, np.inf), grid)
    with pytest.raises(ConfigError):
        solve_plaplace_dirichlet(2.5, np.ones(grid.n_interior), grid)


def test_plaplace_reports_small_residual():
    grid = Grid(0.0, 1.0, 256)
    _, resid, sweeps = solve_plaplace_dirichlet(
        1.5, np.ones(grid.n_interior), grid, tol=1e-10
    )
    assert resid <= 1e-8
    assert sweeps > 0


def test_plaplace_deterministic_and_exact_at_p2():
    grid = Grid(0.0, 1.0, 128)
    rhs = np.ones(grid.n_interior)
    a, _, _ = solve_plaplace_dirichlet(1.5, rhs, grid, tol=1e-11)
    b, _, _ = solve_plaplace_dirichlet(1.5, rhs, grid, tol=1e-11)
    assert np.array_equal(a, b)
    # p = 2 with unit source is x(1-x)/2, which the flux reconstruction
    # reproduces to roundoff.
    w, _, _ = solve_plaplace_dirichlet(2.0, rhs, grid)
    x = grid.interior_nodes
    assert np.allclose(w, 0.5 * x * (1.0 - x), atol=1e-13)


# ---------------------------------------------------------------- eigenpair

def test_eigen_p2_matches_pi_squared():
    grid = Grid(0.0, 1.0, 512)
    pair = first_eigenpair(2.0, grid)
    assert abs(pair.lam - math.pi**2) <= 1e-3 * math.pi**2
    exact = np.sin(np.pi * grid.interior_nodes)
    assert float(np.max(np.abs(pair.phi.interior_values - exact))) <= 1e-3


def test_eigen_p15_matches_closed_form():
    # lam1(1.5, L=1) = 5.318718076379171, verified by shooting.
    grid = Grid(0.0, 1.0, 1024)
    pair = first_eigenpair(1.5, grid)
    assert pair.lam == pytest.approx(5.318718076379171, rel=5e-3)


@pytest.mark.parametrize("p", [1.2, 1.8])
def test_eigen_self_convergence_toward_exact(p):
    coarse = first_eigenpair(p, Grid(0.0, 1.0, 256)).lam
    fine = first_eigenpair(p, Grid(0.0, 1.0, 512)).lam
    exact = lam1_exact(p)
    assert abs(fine - exact) < abs(coarse - exact)
    assert fine == pytest.approx(exact, rel=5e-3)


def test_eigen_domain_scaling():
    # lam1 on (0, L) equals lam1 on (0, 1) divided by L^p.
    p = 1.5
    lam_1 = first_eigenpair(p, Grid(0.0, 1.0, 512)).lam
    lam_2 = first_eigenpair(p, Grid(0.0, 2.0, 512)).lam
    assert lam_2 == pytest.approx(lam_1 / 2.0**p, rel=5e-3)


def test_eigen_profile_positive_and_normalized():
    pair = first_eigenpair(1.5, Grid(0.0, 1.0, 256))
    vals = pair.phi.interior_values
    assert np.min(vals) > 0.0
    assert np.max(vals) == pytest.approx(1.0, abs=1e-14)
    assert pair.phi.boundary_value == 0.0


def test_eigen_rayleigh_consistency():
    grid = Grid(0.0, 1.0, 256)
    pair = first_eigenpair(1.5, grid, tol=1e-8)
    rq = rayleigh_quotient(1.5, pair.phi.interior_values, grid)
    assert rq == pytest.approx(pair.lam, rel=1e-12)


def test_rayleigh_rejects_zero_field():
    grid = Grid(0.0, 1.0, 64)
    with pytest.raises(ConfigError):
        rayleigh_quotient(1.5, np.zeros(grid.n_interior), grid)
