"""Implicit time stepping for the coupled degenerate system."""
import math

import numpy as np
import pytest

from fastdiff import ConfigError, Field, Grid, StatePair, SystemParams
from fastdiff.parabolic import (
    BLOW_UP_GUARD,
    SolverConfig,
    comparison_check,
    dissipation_constant,
    energy_residual,
    growth_bound_check,
    monotone_iterate,
    simulate,
    step,
)

PARAMS = SystemParams(p=1.5, q=1.5, m=1.0, n=1.0)


def sine_pair(grid, amp_u=0.2, amp_v=0.1):
    u = Field.from_callable(grid, lambda x: amp_u * np.sin(np.pi * x))
    v = Field.from_callable(grid, lambda x: amp_v * np.sin(np.pi * x))
    return u, v


# ---------------------------------------------------------------- config

def test_solver_config_validation():
    good = dict(dt=1e-3, t_max=1.0)
    for bad in (
        dict(dt=0.0), dict(t_max=1e-4), dict(eps_reg=0.0), dict(eps_reg=0.1),
        dict(picard_tol=0.0), dict(picard_max=0), dict(extinction_tol=0.0),
        dict(snapshot_every=0), dict(stall_factor=0.5),
    ):
        with pytest.raises(ConfigError):
            SolverConfig(**{**good, **bad})


def test_simulate_rejects_mismatched_grid_and_negativity():
    grid = Grid(0.0, 2.0, 32)  # not the params interval
    u, v = sine_pair(Grid(0.0, 1.0, 32))
    with pytest.raises(ConfigError):
        simulate(Field.zeros(grid), Field.zeros(grid), PARAMS, SolverConfig(dt=1e-3, t_max=0.01))
    neg = Field(Grid(0.0, 1.0, 32), np.full(31, -0.1))
    with pytest.raises(ConfigError):
        simulate(neg, v, PARAMS, SolverConfig(dt=1e-3, t_max=0.01))


def test_frozen_mode_needs_source_fn():
    grid = Grid(0.0, 1.0, 32)
    u, v = sine_pair(grid)
    cfg = SolverConfig(dt=1e-3, t_max=0.01)
    with pytest.raises(ConfigError):
        simulate(u, v, PARAMS, cfg, source_mode="frozen")
    with pytest.raises(ConfigError):
        simulate(u, v, PARAMS, cfg, frozen_source_fn=lambda t: None)


# ---------------------------------------------------------------- basics

def test_zero_data_reports_extinction_at_zero():
    grid = Grid(0.0, 1.0, 32)
    cfg = SolverConfig(dt=1e-2, t_max=1.0)
    traj = simulate(Field.zeros(grid), Field.zeros(grid), PARAMS, cfg)
    assert traj.extinction_time == 0.0
    assert float(np.max(np.abs(traj.final_state.u.interior_values))) == 0.0


def test_single_step_matches_simulate_start():
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid)
    cfg = SolverConfig(dt=1e-3, t_max=0.01)
    new_state, rep = step(StatePair(u, v), PARAMS, cfg)
    traj = simulate(u, v, PARAMS, cfg)
    assert rep.iters >= 1
    assert traj.sup_u[1] == pytest.approx(
        float(np.max(new_state.u.interior_values)), rel=1e-14
    )


def test_symmetry_preserved():
    # p = q, m = n with identical data keeps u = v and the x-reflection.
    grid = Grid(0.0, 1.0, 64)
    u = Field.from_callable(grid, lambda x: 0.3 * np.sin(np.pi * x))
    traj = simulate(u, u, PARAMS, SolverConfig(dt=1e-3, t_max=0.05))
    uf = traj.final_state.u.interior_values
    vf = traj.final_state.v.interior_values
    assert np.allclose(uf, vf, atol=1e-13)
    assert np.allclose(uf, uf[::-1], atol=1e-12)


def test_sup_norm_decays_without_source():
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid, 0.5, 0.4)
    traj = simulate(u, v, PARAMS, SolverConfig(dt=1e-3, t_max=0.1), source_mode="none")
    assert np.all(np.diff(traj.sup_u) <= 1e-14)
    assert np.all(np.diff(traj.norm_u) <= 1e-12)
    assert traj.res_u[1] >= 0.0


def test_p2_linear_heat_decay_rate():
    # p = q = 2 without source is the heat equation: sup decays like
    # e^(-pi^2 t) for the sine profile (oracle e^(-pi^2/100) per 0.01).
    grid = Grid(0.0, 1.0, 256)
    params = SystemParams(p=2.0, q=2.0, m=1.0, n=1.0)
    u, v = sine_pair(grid, 1.0, 1.0)
    with pytest.raises(ConfigError):
        SystemParams(p=2.0, q=2.0, m=0.0, n=1.0)
    traj = simulate(u, v, params, SolverConfig(dt=1e-4, t_max=0.01), source_mode="none")
    assert traj.sup_u[-1] == pytest.approx(math.exp(-math.pi**2 * 0.01), rel=2e-3)


def test_positivity_preserved():
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid, 1.0, 0.01)
    traj = simulate(u, v, PARAMS, SolverConfig(dt=1e-3, t_max=0.2))
    assert float(np.min(traj.final_state.u.interior_values)) >= 0.0
    assert float(np.min(traj.final_state.v.interior_values)) >= 0.0


def test_snapshots_cover_final_time():
    grid = Grid(0.0, 1.0, 32)
    u, v = sine_pair(grid)
    cfg = SolverConfig(dt=1e-3, t_max=0.0305, snapshot_every=10, stop_at_extinction=False)
    traj = simulate(u, v, PARAMS, cfg)
    assert traj.snap_times[-1] == pytest.approx(traj.times[-1])
    assert traj.snap_u.shape[1] == grid.n_interior
    i = traj.snapshot_index(traj.snap_times[1])
    assert i == 1
    with pytest.raises(ConfigError):
        traj.snapshot_index(0.5 * (traj.snap_times[0] + traj.snap_times[1]))


# ---------------------------------------------------------------- extinction

def test_fast_diffusion_extinguishes_and_grid_agrees():
    amp = 0.05
    times = {}
    for n_cells in (64, 128):
        grid = Grid(0.0, 1.0, n_cells)
        u, v = sine_pair(grid, amp, amp)
        cfg = SolverConfig(dt=5e-4, t_max=2.0)
        traj = simulate(u, v, PARAMS, cfg)
        assert traj.extinction_time is not None
        times[n_cells] = traj.extinction_time
    assert times[64] == pytest.approx(times[128], rel=0.1)


def test_extinction_pending_when_run_is_cut_short():
    grid = Grid(0.0, 1.0, 32)
    u = Field(grid, np.full(grid.n_interior, 1e-7))  # already below tol
    cfg = SolverConfig(dt=1e-3, t_max=0.005)  # too short to confirm
    traj = simulate(u, u, PARAMS, cfg)
    assert traj.extinction_time is None
    assert traj.extinction_pending


def test_stop_at_extinction_false_runs_to_t_max():
    grid = Grid(0.0, 1.0, 32)
    u, v = sine_pair(grid, 0.01, 0.01)
    cfg = SolverConfig(dt=2e-3, t_max=1.0, stop_at_extinction=False)
    traj = simulate(u, v, PARAMS, cfg)
    assert traj.times[-1] == pytest.approx(1.0)
    assert traj.extinction_time is not None


def test_blow_up_guard_records_and_stops():
    # Quadratic sources with O(10) data outrun the damping long before any
    # extinction; the run must stop at the guard without raising.
    grid = Grid(0.0, 1.0, 32)
    params = SystemParams(p=1.5, q=1.5, m=2.0, n=2.0)
    u = Field.from_callable(grid, lambda x: 10.0 * np.sin(np.pi * x))
    cfg = SolverConfig(dt=1e-3, t_max=50.0)
    traj = simulate(u, u, params, cfg)
    assert traj.blow_up_time is not None
    assert max(traj.sup_u[-1], traj.sup_v[-1]) > BLOW_UP_GUARD


# ---------------------------------------------------------------- energy

def test_dissipation_constant_values():
    assert dissipation_constant(2.0, 1.5) == pytest.approx(1.0, rel=1e-15)
    assert dissipation_constant(2.0, 2.0) == pytest.approx(1.0, rel=1e-15)
    assert dissipation_constant(4.0, 1.5) == pytest.approx(0.841697576624542, rel=1e-12)


def test_energy_residual_shrinks_with_dt():
    grid = Grid(0.0, 1.0, 128)
    u, v = sine_pair(grid, 0.5, 0.3)
    state = StatePair(u, v)
    res = {}
    for dt in (2e-3, 1e-3):
        cfg = SolverConfig(dt=dt, t_max=1.0)
        new_state, _ = step(state, PARAMS, cfg)
        res[dt] = energy_residual(state, new_state, dt, 2.0, 2.0, PARAMS)[0]
    # First-order balance: halving dt should roughly halve the defect.
    ratio = res[2e-3] / res[1e-3]
    assert 1.4 <= ratio <= 2.6


def test_energy_residual_requires_zero_boundary():
    grid = Grid(0.0, 1.0, 32)
    u = Field(grid, np.full(grid.n_interior, 0.5), boundary_value=0.5)
    state = StatePair(u, u)
    with pytest.raises(ConfigError):
        energy_residual(state, state, 1e-3, 2.0, 2.0, PARAMS)


def test_trajectory_residuals_match_standalone():
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid, 0.4, 0.2)
    cfg = SolverConfig(dt=1e-3, t_max=0.002)
    traj = simulate(u, v, PARAMS, cfg)
    new_state, _ = step(StatePair(u, v), PARAMS, cfg)
    ru, rv = energy_residual(StatePair(u, v), new_state, 1e-3, 2.0, 2.0, PARAMS)
    assert traj.res_u[1] == pytest.approx(ru, rel=1e-12)
    assert traj.res_v[1] == pytest.approx(rv, rel=1e-12)


# ---------------------------------------------------------------- regularization

def test_regularization_consistency():
    # Successive eps reductions must converge: the 1e-3 vs 1e-4 gap is
    # strictly inside the 1e-2 vs 1e-3 gap.
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid, 0.5, 0.5)
    finals = {}
    for eps in (1e-2, 1e-3, 1e-4):
        cfg = SolverConfig(dt=1e-3, t_max=0.05, eps_reg=eps)
        finals[eps] = simulate(u, v, PARAMS, cfg).final_state.u.interior_values
    gap_coarse = float(np.max(np.abs(finals[1e-2] - finals[1e-3])))
    gap_fine = float(np.max(np.abs(finals[1e-3] - finals[1e-4])))
    assert gap_fine < gap_coarse


# ---------------------------------------------------------------- bounds

def test_growth_bound_dominates_sourced_run():
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid, 0.5, 0.5)
    traj = simulate(u, v, PARAMS, SolverConfig(dt=1e-3, t_max=0.2, stop_at_extinction=False))
    report = growth_bound_check(traj, PARAMS)
    assert report.passed
    assert report.max_excess_u <= 0.0


def test_growth_bound_rejects_smaller_cap():
    grid = Grid(0.0, 1.0, 32)
    u, v = sine_pair(grid, 0.5, 0.5)
    traj = simulate(u, v, PARAMS, SolverConfig(dt=1e-3, t_max=0.05))
    with pytest.raises(ConfigError):
        growth_bound_check(traj, PARAMS, U0=0.1)


def test_comparison_orders_scaled_data():
    grid = Grid(0.0, 1.0, 64)
    u, v = sine_pair(grid, 0.4, 0.4)
    cfg = SolverConfig(dt=1e-3, t_max=0.1, snapshot_every=5, stop_at_extinction=False)
    high = simulate(u, v, PARAMS, cfg)
    low = simulate(u.scaled(0.5), v.scaled(0.5), PARAMS, cfg)
    report = comparison_check(low, high, tol=1e-7)
    assert report.passed
    assert report.max_sup_u <= 0.0


def test_monotone_iteration_is_nondecreasing():
    # Start from a strict subsolution (scaled eigen-profile in the eligible
    # corner) and check the frozen-source chain climbs.
    from fastdiff.criteria import build_subsolution
    from fastdiff.elliptic import first_eigenpair

    params = SystemParams(p=1.8, q=1.8, m=0.5, n=0.5)
    grid = Grid(0.0, 1.0, 48)
    eig = first_eigenpair(1.8, grid)
    spec = build_subsolution(params, eig, safety=0.9)
    cfg = SolverConfig(dt=2e-3, t_max=0.05)
    result = monotone_iterate(spec.u_field, spec.v_field, params, cfg, k_max=3)
    assert len(result.trajectories) == 3
    assert result.passed
    assert all(g >= -result.threshold for g in result.min_gaps)


def test_monotone_iterate_rejects_bad_k():
    grid = Grid(0.0, 1.0, 32)
    u, v = sine_pair(grid)
    with pytest.raises(ConfigError):
        monotone_iterate(u, v, PARAMS, SolverConfig(dt=1e-3, t_max=0.01), 0)
