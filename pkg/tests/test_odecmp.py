"""Comparison ODE system: region geometry, inward-flow certificate,
adaptive integration with the stiff tail, and the scaled-profile system.

Closed-form oracles: decoupled decay W' = -a W^(p-1) crosses threshold tau
at (W0^(2-p) - tau^(2-p)) / (a (2-p)); on the diagonal of the symmetric
canonical system (a=4, b=1, p=q=1.5, m=n=0.5) the pair obeys W' = -3 sqrt(W),
crossing 1e-10 at (1 - 1e-5) / 1.5.  Inward margins were frozen from a dense
independent evaluation of the two envelope functions.
"""
import math

import numpy as np
import pytest

from fastdiff import ConfigError
from fastdiff.odecmp import (
    EXTINCTION_THRESHOLD,
    OdeParams,
    OdeState,
    g_system,
    g_window,
    growth_integrate,
    in_region_horizon,
    integrate,
    invariance_check,
    region_cap,
    region_coefficients,
    region_inward_margin,
    region_membership,
    region_nonempty,
)


def canonical(delta=0.5):
    return OdeParams(a1=4.0, b1=1.0, a2=4.0, b2=1.0,
                     p=1.5, q=1.5, m=0.5, n=0.5, delta=delta)


# ---------------------------------------------------------------- validation

def test_params_validation():
    good = dict(a1=1, b1=1, a2=1, b2=1, p=1.5, q=1.5, m=1, n=1, delta=0.5)
    for bad in (
        dict(a1=0.0), dict(b1=-1.0), dict(p=2.0), dict(q=1.0),
        dict(m=0.0), dict(delta=0.0), dict(delta=1.0), dict(a2=math.nan),
    ):
        with pytest.raises(ConfigError):
            OdeParams(**{**good, **bad})


def test_params_coerce_numpy_scalars():
    p = OdeParams(a1=np.float64(1.0), b1=np.float64(1.0), a2=np.float64(1.0),
                  b2=np.float64(1.0), p=np.float64(1.5), q=np.float64(1.5),
                  m=np.float64(1.0), n=np.float64(1.0), delta=np.float64(0.5))
    assert all(type(getattr(p, f)) is float
               for f in ("a1", "b1", "a2", "b2", "p", "q", "m", "n", "delta"))


def test_state_validation():
    with pytest.raises(ConfigError):
        OdeState(-1.0, 0.0)
    with pytest.raises(ConfigError):
        OdeState(math.inf, 0.0)


def test_rhs_holds_components_at_zero():
    params = canonical()
    f1, f2 = params.rhs(0.0, 0.0)
    assert f1 == 0.0 and f2 == 0.0
    f1, f2 = params.rhs(0.0, 1.0)
    assert f1 == 1.0  # source pushes up, allowed
    assert f2 == -4.0


# ---------------------------------------------------------------- region

def test_region_coefficients_canonical():
    # c_lo = (b1/(delta a1))^(1/(p-1)) = 0.25, c_hi = (delta a2/b2)^(1/n) = 4.
    assert region_coefficients(canonical()) == pytest.approx((0.25, 1.0, 4.0, 1.0))


def test_region_requires_positive_couplings():
    params = OdeParams(a1=1, b1=0, a2=1, b2=0, p=1.5, q=1.5, m=1, n=1, delta=0.5)
    with pytest.raises(ConfigError):
        region_coefficients(params)


def test_region_membership_canonical():
    params = canonical()
    assert region_membership(OdeState(0.0, 0.0), params)
    assert region_membership(OdeState(1.0, 1.0), params)
    assert region_membership(OdeState(4.0, 1.0), params)  # on the upper envelope
    assert not region_membership(OdeState(5.0, 1.0), params)
    assert not region_membership(OdeState(0.1, 1.0), params)


def test_region_cap_critical_wedge_unbounded():
    assert region_cap(canonical()) == math.inf


def test_region_cap_empty_when_coefficients_cross():
    # a=b=1: c_lo = 4 > c_hi = 0.25, empty wedge at criticality.
    params = OdeParams(a1=1, b1=1, a2=1, b2=1, p=1.5, q=1.5, m=0.5, n=0.5, delta=0.5)
    assert region_cap(params) == 0.0
    ok, interval = region_nonempty(params)
    assert not ok and interval == (0.0, 0.0)


def test_region_cap_supercritical_closes():
    # e_lo = 2, e_hi = 0.5, c_lo = 0.25, c_hi = 2: cap = 8^(2/3) = 4.
    params = OdeParams(a1=4, b1=1, a2=4, b2=1, p=1.5, q=1.5, m=1.0, n=1.0, delta=0.5)
    assert region_cap(params) == pytest.approx(4.0, rel=1e-12)
    ok, (lo, hi) = region_nonempty(params)
    assert ok and lo == 0.0 and hi == pytest.approx(4.0, rel=1e-12)


def test_region_nonempty_rejects_subcritical():
    params = OdeParams(a1=1, b1=1, a2=1, b2=1, p=1.8, q=1.8, m=0.5, n=0.5, delta=0.5)
    with pytest.raises(ConfigError):
        region_nonempty(params)


# ------------------------------------------------------- inward-flow margin

def test_inward_margin_frozen_values():
    # Dense independent evaluation of the envelope conditions froze these.
    assert region_inward_margin(canonical(0.5), 1.0) == pytest.approx(-0.125, abs=1e-12)
    assert region_inward_margin(canonical(0.9), 1.0) == pytest.approx(
        0.5705555555555555, abs=1e-12
    )


def test_inward_margin_amplitude_floor_harmless_here():
    # For these exponents the envelope sup sits at w2_max, so a tiny floor
    # does not change the margin.
    params = canonical(0.9)
    assert region_inward_margin(params, 1.0, 1e-8) == pytest.approx(
        region_inward_margin(params, 1.0), abs=1e-12
    )


def test_inward_margin_validation():
    with pytest.raises(ConfigError):
        region_inward_margin(canonical(), 0.0)
    with pytest.raises(ConfigError):
        region_inward_margin(canonical(), 1.0, 2.0)


def test_wedge_leaks_at_half_delta():
    # Domination alone does not make the wedge invariant: with delta = 0.5
    # the flow exits through the upper envelope near (4, 1) and the
    # excursion is macroscopic, which is why the margin above is negative.
    traj = integrate(canonical(0.5), OdeState(4.0, 1.0))
    excursion = float(np.max(traj.states[:, 0] - 4.0 * traj.states[:, 1]))
    assert excursion > 0.1


def test_positive_margin_flow_stays_inside():
    report = invariance_check(canonical(0.9), OdeState(1.0, 1.0))
    assert report.passed
    assert report.max_violation <= 1e-8
    assert report.extinction_time is not None


def test_boundary_starts_stay_inside_at_high_delta():
    params = canonical(0.9)
    c_lo, e_lo, c_hi, e_hi = region_coefficients(params)
    for w1 in (c_lo, c_hi):  # both envelopes at W2 = 1
        report = invariance_check(params, OdeState(w1, 1.0))
        assert report.passed, f"start ({w1}, 1) left the wedge"


def test_invariance_check_rejects_outside_start():
    with pytest.raises(ConfigError):
        invariance_check(canonical(0.9), OdeState(50.0, 1.0))


# ---------------------------------------------------------------- integrate

def test_decoupled_extinction_closed_form():
    params = OdeParams(a1=1, b1=0, a2=1, b2=0, p=1.5, q=1.5, m=1, n=1, delta=0.5)
    traj = integrate(params, OdeState(1.0, 1.0), t_max=3.0)
    crossing = (1.0 - math.sqrt(EXTINCTION_THRESHOLD)) / 0.5
    assert traj.extinction_time == pytest.approx(crossing, rel=1e-6)
    # Threshold crossing approximates true extinction at 2.0 to 1e-5 rel.
    assert traj.extinction_time == pytest.approx(2.0, rel=1e-4)


def test_symmetric_coupled_closed_form():
    # Diagonal flow W' = -3 sqrt(W): crossing of 1e-10 at (1 - 1e-5)/1.5.
    traj = integrate(canonical(0.5), OdeState(1.0, 1.0))
    assert traj.extinction_time == pytest.approx((1.0 - 1e-5) / 1.5, rel=1e-6)
    # Symmetry is preserved along the way.
    assert float(np.max(np.abs(traj.states[:, 0] - traj.states[:, 1]))) <= 1e-9


def test_zero_start_is_already_extinct():
    traj = integrate(canonical(0.5), OdeState(0.0, 0.0), t_max=1.0)
    assert traj.extinction_time == 0.0


def test_extinction_before_horizon():
    params = canonical(0.9)
    state = OdeState(1.0, 1.0)
    traj = integrate(params, state)
    assert traj.extinction_time is not None
    assert traj.extinction_time <= in_region_horizon(params, state)


def test_larger_start_survives_longer():
    params = canonical(0.9)
    t_small = integrate(params, OdeState(0.5, 0.5)).extinction_time
    t_large = integrate(params, OdeState(1.0, 1.0)).extinction_time
    assert t_small < t_large


def test_integrate_requires_t_max_or_region():
    params = canonical(0.5)
    with pytest.raises(ConfigError):
        integrate(params, OdeState(50.0, 1.0))  # outside, no horizon
    with pytest.raises(ConfigError):
        integrate(params, OdeState(1.0, 1.0), t_max=-1.0)


def test_stiff_tail_handoff_regression():
    # Skewed exponents drive the slaved component onto a quasi-steady
    # manifold whose relaxation rate diverges near extinction; the explicit
    # loop alone needed ~129k steps here.  The implicit tail caps the count
    # and must reproduce the same crossing.
    params = OdeParams(a1=1.586, b1=1.801, a2=2.200, b2=1.881,
                       p=1.4, q=1.1716, m=0.8009, n=0.2712, delta=0.547)
    traj = integrate(params, OdeState(0.01699, 0.0446))
    assert traj.extinction_time == pytest.approx(0.11438991280273042, rel=1e-6)
    assert len(traj.times) < 10_000


def test_trajectory_interpolation():
    traj = integrate(canonical(0.9), OdeState(1.0, 1.0))
    t_mid = 0.5 * traj.extinction_time
    w = traj.at(t_mid)
    i = int(np.searchsorted(traj.times, t_mid))
    lo = min(traj.states[i - 1, 0], traj.states[i, 0])
    hi = max(traj.states[i - 1, 0], traj.states[i, 0])
    assert lo - 1e-9 <= w[0] <= hi + 1e-9
    # Holding past the end is allowed only after extinction.
    held = traj.at(traj.times[-1] + 5.0)
    assert max(held) <= traj.threshold * (1.0 + 1e-9)
    with pytest.raises(ConfigError):
        traj.at(traj.times[0] - 1.0)


def test_trajectory_refuses_extrapolation_without_extinction():
    params = canonical(0.9)
    traj = integrate(params, OdeState(1.0, 1.0), t_max=0.05)
    assert traj.extinction_time is None
    with pytest.raises(ConfigError):
        traj.at(1.0)


# ---------------------------------------------------------------- growth

def test_growth_exponential_closed_form():
    # m = n = 1 from (1,1): U = V = e^t.
    traj = growth_integrate(1.0, 1.0, OdeState(1.0, 1.0), 5.0)
    U, V = traj.at(5.0)
    assert U == pytest.approx(math.exp(5.0), rel=1e-6)
    assert V == pytest.approx(math.exp(5.0), rel=1e-6)


def test_growth_zero_is_fixed_point():
    traj = growth_integrate(1.0, 1.0, OdeState(0.0, 0.0), 2.0)
    assert float(np.max(traj.states)) == 0.0
    assert traj.blow_up_time is None


def test_growth_blow_up_closed_form():
    # m = n = 2 on the diagonal: U' = U^2, so U = 1/(1-t) blows up at 1.
    traj = growth_integrate(2.0, 2.0, OdeState(1.0, 1.0), 2.0)
    assert traj.blow_up_time is not None
    assert traj.blow_up_time == pytest.approx(1.0, abs=1e-6)


def test_growth_rejects_bad_arguments():
    with pytest.raises(ConfigError):
        growth_integrate(0.0, 1.0, OdeState(1.0, 1.0), 1.0)
    with pytest.raises(ConfigError):
        growth_integrate(1.0, 1.0, OdeState(1.0, 1.0), 0.0)


# ---------------------------------------------------------- scaled profiles

def test_g_window_frozen():
    # (sqrt(.5)/.8)^2 = 25/32 and (.8/sqrt(.5))^2 = 32/25, by hand.
    lo, hi = g_window(0.5, 0.5, 1.5, 1.5, 0.5, 0.5, 0.8, 1.0)
    assert lo == pytest.approx(0.78125, rel=1e-12)
    assert hi == pytest.approx(1.28, rel=1e-12)


def test_g_system_integrates_to_extinction():
    res = g_system(0.5, 0.5, 1.5, 1.5, 0.5, 0.5, 0.8)
    assert res.window == pytest.approx((0.78125, 1.28), rel=1e-12)
    # Geometric midpoint of the window is exactly 1 here.
    assert res.g0.W1 == pytest.approx(1.0, rel=1e-12)
    assert res.T0 > 0.0
    assert res.trajectory.extinction_time == pytest.approx(res.T0, rel=1e-12)


def test_g_system_rejects_out_of_window_start():
    with pytest.raises(ConfigError):
        g_system(0.5, 0.5, 1.5, 1.5, 0.5, 0.5, 0.8, g1_0=2.0)


def test_g_system_preconditions():
    with pytest.raises(ConfigError):
        g_system(1.0, 0.5, 1.5, 1.5, 0.5, 0.5, 0.8)  # profile sup not < 1
    with pytest.raises(ConfigError):
        g_system(0.5, 0.5, 1.5, 1.5, 1.0, 1.0, 0.8)  # not critical
    with pytest.raises(ConfigError):
        g_system(0.5, 0.5, 1.5, 1.5, 0.5, 0.5, 0.5)  # product >= delta^2
