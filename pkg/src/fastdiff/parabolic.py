"""Implicit time stepping for the coupled fast-diffusion system.

One step solves both components with backward Euler, linearized by
lagged-coefficient Picard sweeps (see fastdiff._kernels).  The implicit
operator is an M-matrix, so nonnegative data plus nonnegative sources give
nonnegative solutions up to solver roundoff; the kernel clamps those
undershoots and flags anything larger as a defect.

Beyond stepping, this module records the norm time series that the
comparison ODE machinery consumes, evaluates per-step residuals of the
power-law energy balance, checks domination against the sourceless growth
system, compares ordered runs, and carries out the monotone frozen-source
iteration used in the nonextinction construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import Field, Grid, StatePair, SystemParams, trapezoid_weights
from .errors import ConfigError, ConvergenceError, NumericalError
from .odecmp import OdeState, OdeTrajectory, growth_integrate

BLOW_UP_GUARD = 1e6
EXTINCTION_PERSIST_STEPS = 20


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping controls.

    dt is the nominal step (the final step shrinks to land on t_max
    exactly).  eps_reg caps the degenerate flux coefficient; picard_tol is
    relative to 1 + the solution scale.  A step whose Picard residual
    plateaus above tolerance but within stall_factor of it is accepted and
    counted (non-Lipschitz sources pin the achievable residual near
    extinction); residuals beyond that raise.  extinction_tol is the
    sup-norm level that must persist to declare extinction.  Note the
    interaction with eps_reg: for sublinear sources the flux linearization
    below gradient scale sqrt(eps_reg) leaves a tiny positive equilibrium,
    so runs chasing extinction through many decades (critical-regime
    studies) should shrink eps_reg below its default.
    """

    dt: float
    t_max: float
    eps_reg: float = 1e-8
    picard_tol: float = 1e-8
    picard_max: int = 60
    extinction_tol: float = 1e-6
    snapshot_every: int = 10
    stop_at_extinction: bool = True
    stall_factor: float = 1e3

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_max) and self.t_max >= self.dt):
            raise ConfigError(f"t_max must be >= dt, got {self.t_max}")
        if not (0.0 < self.eps_reg <= 1e-2):
            raise ConfigError(f"eps_reg must lie in (0, 1e-2], got {self.eps_reg}")
        if self.picard_tol <= 0.0:
            raise ConfigError(f"picard_tol must be positive, got {self.picard_tol}")
        if self.picard_max < 1:
            raise ConfigError(f"picard_max must be >= 1, got {self.picard_max}")
        if self.extinction_tol <= 0.0:
            raise ConfigError(f"extinction_tol must be positive, got {self.extinction_tol}")
        if self.snapshot_every < 1:
            raise ConfigError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if self.stall_factor < 1.0:
            raise ConfigError(f"stall_factor must be >= 1, got {self.stall_factor}")


@dataclass
class Trajectory:
    """Recorded time series of one simulation.

    norm_u is the L^s norm of u and norm_v the L^r norm of v (the exponents
    travel with the trajectory).  res_u/res_v are per-step energy-balance
    residuals, zero at the initial instant and whenever the balance does not
    apply (nonzero boundary data).  Snapshots hold interior values every
    snapshot_every steps plus the final step.
    """

    grid: Grid
    s: float
    r: float
    bc_u: float
    bc_v: float
    times: np.ndarray
    sup_u: np.ndarray
    sup_v: np.ndarray
    norm_u: np.ndarray
    norm_v: np.ndarray
    res_u: np.ndarray
    res_v: np.ndarray
    picard_iters: np.ndarray
    snap_times: np.ndarray
    snap_u: np.ndarray
    snap_v: np.ndarray
    final_state: StatePair
    extinction_time: float | None = None
    extinction_pending: bool = False
    blow_up_time: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def snapshot_state(self, i: int) -> StatePair:
        return StatePair(
            Field(self.grid, self.snap_u[i], self.bc_u),
            Field(self.grid, self.snap_v[i], self.bc_v),
        )

    def snapshot_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.snap_times - t)))
        if abs(self.snap_times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"no snapshot at t={t}")
        return i


@dataclass(frozen=True)
class StepReport:
    iters: int
    resid: float
    stalled: bool


def _tol_scale(u: np.ndarray, v: np.ndarray, bc_u: float, bc_v: float) -> float:
    return max(float(u.max()), float(v.max()), bc_u, bc_v)


def _advance(u, v, bc_u, bc_v, params, cfg, dt, h, mode, src_u, src_v):
    """One kernel call plus stall/defect policy. Returns (u, v, StepReport)."""
    u_new, v_new, iters, resid, neg = _kernels.pair_step(
        u, v, bc_u, bc_v,
        params.p, params.q, params.m, params.n,
        dt, h,
        cfg.eps_reg, cfg.picard_tol, cfg.picard_max,
        mode, src_u, src_v,
    )
    if neg:
        raise NumericalError(
            "implicit solve produced negativity beyond the roundoff clamp; "
            "the step is not trustworthy (check dt and eps_reg)"
        )
    tol_eff = cfg.picard_tol * (1.0 + _tol_scale(u_new, v_new, bc_u, bc_v))
    stalled = resid > tol_eff
    if stalled and resid > cfg.stall_factor * tol_eff:
        raise ConvergenceError(
            f"Picard iteration failed: residual {resid:.3e} vs tolerance {tol_eff:.3e}",
            iterations=iters,
            residual=resid,
        )
    return u_new, v_new, StepReport(iters=iters, resid=resid, stalled=stalled)


def step(
    state: StatePair,
    params: SystemParams,
    cfg: SolverConfig,
    *,
    dt: float | None = None,
    source_mode: str = "coupled",
    frozen_sources: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[StatePair, StepReport]:
    """Advance a state pair by one implicit step."""
    mode = _kernels.SOURCE_MODES[source_mode]
    grid = state.grid
    _check_grid_matches(grid, params)
    dt = cfg.dt if dt is None else dt
    u = np.ascontiguousarray(state.u.interior_values, dtype=np.float64)
    v = np.ascontiguousarray(state.v.interior_values, dtype=np.float64)
    if mode == _kernels.SOURCE_FROZEN:
        if frozen_sources is None:
            raise ConfigError("frozen source mode needs explicit source arrays")
        src_u = np.ascontiguousarray(frozen_sources[0], dtype=np.float64)
        src_v = np.ascontiguousarray(frozen_sources[1], dtype=np.float64)
    else:
        src_u = src_v = np.zeros(grid.n_interior)
    u_new, v_new, rep = _advance(
        u, v, state.u.boundary_value, state.v.boundary_value,
        params, cfg, dt, grid.h, mode, src_u, src_v,
    )
    new_state = StatePair(
        Field(grid, u_new, state.u.boundary_value),
        Field(grid, v_new, state.v.boundary_value),
    )
    return new_state, rep


def _check_grid_matches(grid: Grid, params: SystemParams) -> None:
    if not (
        math.isclose(grid.x_lo, params.x_lo, rel_tol=0.0, abs_tol=1e-12)
        and math.isclose(grid.x_hi, params.x_hi, rel_tol=0.0, abs_tol=1e-12)
    ):
        raise ConfigError(
            f"grid interval ({grid.x_lo}, {grid.x_hi}) does not match the "
            f"problem interval ({params.x_lo}, {params.x_hi})"
        )


def _ext(vals: np.ndarray, bc: float) -> np.ndarray:
    out = np.empty(vals.size + 2)
    out[0] = out[-1] = bc
    out[1:-1] = vals
    return out


def _lp_from_ext(ext: np.ndarray, w: np.ndarray, s: float) -> float:
    return float(np.sum(w * np.abs(ext) ** s) ** (1.0 / s))


def dissipation_constant(s: float, p: float) -> float:
    """Coefficient in the power-transform lower bound for the dissipation:
    u' (u^(s-1))' |u'|^(p-2) >= kappa |(u^alpha)'|^p with
    alpha = (s+p-2)/p."""
    return (s - 1.0) * p**p / (s + p - 2.0) ** p


def _energy(ext: np.ndarray, w: np.ndarray, s: float) -> float:
    return float(np.sum(w * ext**s)) / s


def _dissipation(ext: np.ndarray, h: float, s: float, p: float) -> float:
    alpha = (s + p - 2.0) / p
    z = ext**alpha
    dz = np.diff(z) / h
    return dissipation_constant(s, p) * h * float(np.sum(np.abs(dz) ** p))


def _source_work(u_ext: np.ndarray, v_ext: np.ndarray, w: np.ndarray,
                 s: float, m: float) -> float:
    return float(np.sum(w * v_ext**m * u_ext ** (s - 1.0)))


def _step_energy_residual(u_old, u_new, v_old, v_new, w, h, dt, s, p, m):
    """Residual of the discrete energy balance for one component over one
    step, with dissipation and source evaluated at the field midpoint."""
    e_old = _energy(u_old, w, s)
    e_new = _energy(u_new, w, s)
    u_mid = 0.5 * (u_old + u_new)
    v_mid = 0.5 * (v_old + v_new)
    return abs(
        (e_new - e_old) / dt
        + _dissipation(u_mid, h, s, p)
        - _source_work(u_mid, v_mid, w, s, m)
    )


def energy_residual(
    state_old: StatePair,
    state_new: StatePair,
    dt: float,
    s: float,
    r: float,
    params: SystemParams,
) -> tuple[float, float]:
    """Per-step energy-balance residuals for both components.

    The balance integrates the equation against u^(s-1) (resp. v^(r-1)) and
    requires zero boundary data; it decays like O(dt) as the step is
    refined, which the test suite pins by halving.
    """
    if state_old.u.boundary_value != 0.0 or state_old.v.boundary_value != 0.0:
        raise ConfigError("energy balance requires zero boundary data")
    grid = state_old.grid
    w = trapezoid_weights(grid)
    u0 = _ext(state_old.u.interior_values, 0.0)
    u1 = _ext(state_new.u.interior_values, 0.0)
    v0 = _ext(state_old.v.interior_values, 0.0)
    v1 = _ext(state_new.v.interior_values, 0.0)
    res_u = _step_energy_residual(u0, u1, v0, v1, w, grid.h, dt, s, params.p, params.m)
    res_v = _step_energy_residual(v0, v1, u0, u1, w, grid.h, dt, r, params.q, params.n)
    return res_u, res_v


def simulate(
    u0: Field,
    v0: Field,
    params: SystemParams,
    cfg: SolverConfig,
    *,
    s: float = 2.0,
    r: float = 2.0,
    source_mode: str = "coupled",
    frozen_source_fn=None,
) -> Trajectory:
    """Run the implicit scheme from (u0, v0) until t_max, extinction, or the
    runaway guard.

    Extinction is declared when both sup norms stay at or below
    cfg.extinction_tol for EXTINCTION_PERSIST_STEPS consecutive steps; the
    reported time is the first step of that stretch.  If the run ends while
    the count is still open, extinction_pending is set instead.  Runs are
    stopped (not failed) when either sup norm exceeds BLOW_UP_GUARD.

    frozen_source_fn(t_new) must return the pair of source arrays for the
    step landing at t_new; it is required exactly when source_mode is
    "frozen".
    """
    if u0.grid != v0.grid:
        raise ConfigError("initial components must share a grid")
    grid = u0.grid
    _check_grid_matches(grid, params)
    if np.min(u0.interior_values) < 0.0 or np.min(v0.interior_values) < 0.0:
        raise ConfigError("initial data must be nonnegative")
    mode = _kernels.SOURCE_MODES[source_mode]
    if (mode == _kernels.SOURCE_FROZEN) != (frozen_source_fn is not None):
        raise ConfigError("frozen_source_fn is required iff source_mode is 'frozen'")

    h = grid.h
    w = trapezoid_weights(grid)
    bc_u = u0.boundary_value
    bc_v = v0.boundary_value
    zero_bc = bc_u == 0.0 and bc_v == 0.0
    u = np.ascontiguousarray(u0.interior_values, dtype=np.float64)
    v = np.ascontiguousarray(v0.interior_values, dtype=np.float64)
    zeros_src = np.zeros(grid.n_interior)

    times = [0.0]
    sup_u = [max(float(u.max()), bc_u)]
    sup_v = [max(float(v.max()), bc_v)]
    norm_u = [_lp_from_ext(_ext(u, bc_u), w, s)]
    norm_v = [_lp_from_ext(_ext(v, bc_v), w, r)]
    res_u = [0.0]
    res_v = [0.0]
    iters_hist = [0]
    snap_times = [0.0]
    snap_u = [u.copy()]
    snap_v = [v.copy()]

    t = 0.0
    step_idx = 0
    stalls = 0
    max_resid = 0.0
    total_iters = 0
    ext_first: float | None = None
    ext_count = 0
    confirmed: float | None = None
    blow_up: float | None = None
    # Data already at the threshold counts from t = 0 (zero data must report
    # extinction at 0, not at the end of the first step).
    if max(sup_u[0], sup_v[0]) <= cfg.extinction_tol:
        ext_first = 0.0
        ext_count = 1

    while t < cfg.t_max - 1e-12 * cfg.t_max:
        dt = min(cfg.dt, cfg.t_max - t)
        t_new = t + dt
        if mode == _kernels.SOURCE_FROZEN:
            fu, fv = frozen_source_fn(t_new)
            src_u = np.ascontiguousarray(fu, dtype=np.float64)
            src_v = np.ascontiguousarray(fv, dtype=np.float64)
        else:
            src_u = src_v = zeros_src
        u_new, v_new, rep = _advance(u, v, bc_u, bc_v, params, cfg, dt, h, mode, src_u, src_v)
        step_idx += 1
        total_iters += rep.iters
        stalls += rep.stalled
        max_resid = max(max_resid, rep.resid)

        if zero_bc:
            ue_old, ue_new = _ext(u, 0.0), _ext(u_new, 0.0)
            ve_old, ve_new = _ext(v, 0.0), _ext(v_new, 0.0)
            res_u.append(
                _step_energy_residual(ue_old, ue_new, ve_old, ve_new, w, h, dt, s, params.p, params.m)
            )
            res_v.append(
                _step_energy_residual(ve_old, ve_new, ue_old, ue_new, w, h, dt, r, params.q, params.n)
            )
        else:
            res_u.append(0.0)
            res_v.append(0.0)

        u, v, t = u_new, v_new, t_new
        su = max(float(u.max()), bc_u)
        sv = max(float(v.max()), bc_v)
        times.append(t)
        sup_u.append(su)
        sup_v.append(sv)
        norm_u.append(_lp_from_ext(_ext(u, bc_u), w, s))
        norm_v.append(_lp_from_ext(_ext(v, bc_v), w, r))
        iters_hist.append(rep.iters)

        want_snap = step_idx % cfg.snapshot_every == 0
        if want_snap:
            snap_times.append(t)
            snap_u.append(u.copy())
            snap_v.append(v.copy())

        if max(su, sv) > BLOW_UP_GUARD:
            blow_up = t
            break

        if su <= cfg.extinction_tol and sv <= cfg.extinction_tol:
            if ext_count == 0:
                ext_first = t
            ext_count += 1
            if ext_count >= EXTINCTION_PERSIST_STEPS and confirmed is None:
                confirmed = ext_first
                if cfg.stop_at_extinction:
                    break
        else:
            ext_first = None
            ext_count = 0

    if snap_times[-1] != t:
        snap_times.append(t)
        snap_u.append(u.copy())
        snap_v.append(v.copy())

    final = StatePair(Field(grid, u, bc_u), Field(grid, v, bc_v))
    return Trajectory(
        grid=grid,
        s=s,
        r=r,
        bc_u=bc_u,
        bc_v=bc_v,
        times=np.array(times),
        sup_u=np.array(sup_u),
        sup_v=np.array(sup_v),
        norm_u=np.array(norm_u),
        norm_v=np.array(norm_v),
        res_u=np.array(res_u),
        res_v=np.array(res_v),
        picard_iters=np.array(iters_hist, dtype=int),
        snap_times=np.array(snap_times),
        snap_u=np.array(snap_u),
        snap_v=np.array(snap_v),
        final_state=final,
        extinction_time=confirmed,
        extinction_pending=confirmed is None and ext_count > 0,
        blow_up_time=blow_up,
        diagnostics={
            "backend": _kernels.BACKEND,
            "steps": step_idx,
            "total_picard_iters": total_iters,
            "picard_stalls": stalls,
            "max_picard_resid": max_resid,
        },
    )


@dataclass(frozen=True)
class GrowthBoundReport:
    """Domination of simulated sup norms by the sourceless growth system.

    excess values are the largest amounts by which a sup norm exceeded the
    corresponding ODE component plus margin (negative means comfortably
    below).  If the ODE reached the runaway guard before the trajectory
    ended, times beyond it are not checked and inconclusive_beyond records
    the cutoff.
    """

    passed: bool
    max_excess_u: float
    max_excess_v: float
    horizon: float
    inconclusive_beyond: float | None
    ode: OdeTrajectory = field(repr=False)


def growth_bound_check(
    traj: Trajectory,
    params: SystemParams,
    *,
    U0: float | None = None,
    V0: float | None = None,
    margin_rel: float = 0.01,
    margin_abs: float = 1e-6,
) -> GrowthBoundReport:
    """Check sup_u(t) <= U(t), sup_v(t) <= V(t) with U' = V^m, V' = U^n.

    U0/V0 default to the initial sup norms and must dominate them.  The
    margin absorbs spatial and temporal discretization error.
    """
    if U0 is None:
        U0 = float(traj.sup_u[0])
    if V0 is None:
        V0 = float(traj.sup_v[0])
    if U0 < traj.sup_u[0] * (1.0 - 1e-12) or V0 < traj.sup_v[0] * (1.0 - 1e-12):
        raise ConfigError("growth bound requires U0 >= sup u0 and V0 >= sup v0")

    t_end = float(traj.times[-1])
    ode = growth_integrate(params.m, params.n, OdeState(U0, V0), t_end)
    horizon = ode.blow_up_time if ode.blow_up_time is not None else t_end
    max_eu = -math.inf
    max_ev = -math.inf
    for t, su, sv in zip(traj.times, traj.sup_u, traj.sup_v):
        if t > horizon:
            break
        Uv, Vv = ode.at(float(t))
        max_eu = max(max_eu, su - Uv - (margin_abs + margin_rel * Uv))
        max_ev = max(max_ev, sv - Vv - (margin_abs + margin_rel * Vv))
    return GrowthBoundReport(
        passed=max_eu <= 0.0 and max_ev <= 0.0,
        max_excess_u=max_eu,
        max_excess_v=max_ev,
        horizon=float(horizon),
        inconclusive_beyond=ode.blow_up_time,
        ode=ode,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Pointwise domination of one run by another at shared snapshots."""

    passed: bool
    max_pointwise_u: float
    max_pointwise_v: float
    max_sup_u: float
    max_sup_v: float
    threshold: float


def comparison_check(low: Trajectory, high: Trajectory, *, tol: float) -> ComparisonReport:
    """Check that `low` stays below `high` within tol, pointwise at shared
    snapshot times and in sup norm at every recorded step."""
    if low.grid != high.grid:
        raise ConfigError("comparison requires a shared grid")
    k = min(low.snap_times.size, high.snap_times.size)
    if not np.allclose(low.snap_times[:k], high.snap_times[:k], rtol=0.0, atol=1e-9):
        raise ConfigError("comparison requires aligned snapshot times")
    max_pu = float(np.max(low.snap_u[:k] - high.snap_u[:k]))
    max_pv = float(np.max(low.snap_v[:k] - high.snap_v[:k]))
    ks = min(low.times.size, high.times.size)
    max_su = float(np.max(low.sup_u[:ks] - high.sup_u[:ks]))
    max_sv = float(np.max(low.sup_v[:ks] - high.sup_v[:ks]))
    worst = max(max_pu, max_pv, max_su, max_sv)
    return ComparisonReport(
        passed=worst <= tol,
        max_pointwise_u=max_pu,
        max_pointwise_v=max_pv,
        max_sup_u=max_su,
        max_sup_v=max_sv,
        threshold=tol,
    )


@dataclass(frozen=True)
class MonotoneIterationResult:
    """Frozen-source iterates and their pairwise ordering report.

    min_gaps[i] is the most negative pointwise difference between iterate
    i+2 and iterate i+1 over all shared snapshots (so values >= -threshold
    mean the chain is nondecreasing up to solver tolerance).
    """

    trajectories: list
    min_gaps: list
    passed: bool
    threshold: float


def monotone_iterate(
    u0: Field,
    v0: Field,
    params: SystemParams,
    cfg: SolverConfig,
    k_max: int,
) -> MonotoneIterationResult:
    """Evolve the frozen-source iteration from a stationary subsolution.

    Iterate 1 freezes the sources at the initial pair for all time; iterate
    k reads its sources from iterate k-1 at the matching step.  Starting
    from a subsolution the chain is nondecreasing (up to Picard tolerance),
    which is the discrete shadow of the comparison argument that pins
    solutions above the subsolution for all time.
    """
    if k_max < 1:
        raise ConfigError(f"k_max must be >= 1, got {k_max}")
    dense_cfg = SolverConfig(
        dt=cfg.dt,
        t_max=cfg.t_max,
        eps_reg=cfg.eps_reg,
        picard_tol=cfg.picard_tol,
        picard_max=cfg.picard_max,
        extinction_tol=cfg.extinction_tol,
        snapshot_every=1,
        stop_at_extinction=False,
        stall_factor=cfg.stall_factor,
    )
    src_u0 = np.maximum(v0.interior_values, 0.0) ** params.m
    src_v0 = np.maximum(u0.interior_values, 0.0) ** params.n

    trajectories = []
    for k in range(1, k_max + 1):
        if k == 1:
            fn = lambda t_new: (src_u0, src_v0)
        else:
            prev = trajectories[-1]

            def fn(t_new, _prev=prev):
                i = _prev.snapshot_index(t_new)
                return (
                    np.maximum(_prev.snap_v[i], 0.0) ** params.m,
                    np.maximum(_prev.snap_u[i], 0.0) ** params.n,
                )

        trajectories.append(
            simulate(
                u0, v0, params, dense_cfg,
                source_mode="frozen", frozen_source_fn=fn,
            )
        )

    threshold = 10.0 * cfg.picard_tol
    min_gaps = []
    for a, b in zip(trajectories, trajectories[1:]):
        k = min(a.snap_times.size, b.snap_times.size)
        gap_u = float(np.min(b.snap_u[:k] - a.snap_u[:k]))
        gap_v = float(np.min(b.snap_v[:k] - a.snap_v[:k]))
        min_gaps.append(min(gap_u, gap_v))
    passed = all(g >= -threshold for g in min_gaps)
    return MonotoneIterationResult(
        trajectories=trajectories,
        min_gaps=min_gaps,
        passed=passed,
        threshold=threshold,
    )
