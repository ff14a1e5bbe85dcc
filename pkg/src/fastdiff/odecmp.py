"""Comparison ODE system, invariant region, and companion integrators.

The planar system

    W1' = -a1 W1^(p-1) + b1 W2^m
    W2' = -a2 W2^(q-1) + b2 W1^n

dominates the norm dynamics of the coupled PDE once the constants are
assembled from embedding and measure factors.  Inside the cone-like region

    c_lo W2^e_lo <= W1 <= c_hi W2^e_hi,
    c_lo = (b1/(delta a1))^(1/(p-1)),  e_lo = m/(p-1),
    c_hi = (delta a2/b2)^(1/n),        e_hi = (q-1)/n,

each source term is dominated by a delta-fraction of its own decay term, so
trajectories decay at a guaranteed rate and vanish in finite time for as long
as they stay inside.  Domination alone does not make the region forward
invariant, though: the boundary flow can point outward for admissible
coefficients, so invariance has to be certified separately.  The
region_inward_margin predicate does exactly that via the subtangent
condition on both envelopes.

This module provides membership/invariance/inward-flow checks, an adaptive
integrator with positivity projection, extinction detection, and a
backward-Euler tail for the stiff final approach, the sourceless growth
system U' = V^m, V' = U^n used for upper bounds, and the scaled-profile
system that drives the critical-regime supersolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StepSizeError
from .core import REGIME_RTOL

EXTINCTION_THRESHOLD = 1e-10
BLOW_UP_THRESHOLD = 1e9

# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _pw(x: float, e: float) -> float:
    """Clamped power: nonpositive bases map to 0 (states live in the closed
    positive quadrant and fractional exponents reject negative bases)."""
    return 0.0 if x <= 0.0 else x**e


def _scalar_be(c: float, g: float, R: float) -> float:
    """Root of z + c z^g = R on [0, R] for c >= 0, 0 < g < 1, R >= 0.

    F(z) = z + c z^g - R is increasing and concave, so from a starting point
    at or above the root, Newton lands below it once and then climbs
    monotonically: globally convergent, no safeguards needed beyond the
    analytic start.  This is the backward Euler update of w' = -a w^g + s
    with c = dt a and R = w + dt s."""
    if R <= 0.0 or c <= 0.0:
        return max(R, 0.0)
    # Whichever of R (source-dominated) and (R/c)^(1/g) (decay-dominated)
    # is smaller still evaluates F >= 0, and fewer digits separate it from
    # the root.
    z = min(R, (R / c) ** (1.0 / g))
    if z <= 0.0:
        return 0.0
    for _ in range(100):
        F = z + c * z**g - R
        dF = 1.0 + c * g * z ** (g - 1.0)
        step = F / dF
        z_new = z - step
        if z_new <= 0.0:
            z_new = 1e-3 * z
        if abs(z_new - z) <= 1e-14 * z_new:
            return z_new
        z = z_new
    return z


@dataclass(frozen=True)
class OdeParams:
    """Coefficients and exponents of the comparison system.

    a1, a2 > 0 are the decay coefficients, b1, b2 >= 0 the couplings (zero is
    allowed so decoupled decay can be exercised directly), and delta in (0, 1)
    the domination fraction defining the invariant region.
    """

    a1: float
    b1: float
    a2: float
    b2: float
    p: float
    q: float
    m: float
    n: float
    delta: float

    def __post_init__(self):
        for name in ("a1", "b1", "a2", "b2", "p", "q", "m", "n", "delta"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ConfigError(f"ODE coefficient {name} must be finite")
            # Plain floats keep scalar powers raising OverflowError instead
            # of warning and propagating numpy inf through the region maths.
            object.__setattr__(self, name, float(value))
        if self.a1 <= 0.0 or self.a2 <= 0.0:
            raise ConfigError(f"decay coefficients must be positive, got a1={self.a1}, a2={self.a2}")
        if self.b1 < 0.0 or self.b2 < 0.0:
            raise ConfigError(f"couplings must be >= 0, got b1={self.b1}, b2={self.b2}")
        if not (1.0 < self.p < 2.0 and 1.0 < self.q < 2.0):
            raise ConfigError(f"decay exponents must lie in (1, 2), got p={self.p}, q={self.q}")
        if self.m <= 0.0 or self.n <= 0.0:
            raise ConfigError(f"coupling exponents must be positive, got m={self.m}, n={self.n}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"domination fraction delta must lie in (0, 1), got {self.delta}")

    def rhs(self, w1: float, w2: float) -> tuple[float, float]:
        """Right-hand side with hold-at-zero: a component pinned at zero is
        not pushed negative."""
        f1 = -self.a1 * _pw(w1, self.p - 1.0) + self.b1 * _pw(w2, self.m)
        f2 = -self.a2 * _pw(w2, self.q - 1.0) + self.b2 * _pw(w1, self.n)
        if w1 <= 0.0 and f1 < 0.0:
            f1 = 0.0
        if w2 <= 0.0 and f2 < 0.0:
            f2 = 0.0
        return f1, f2


@dataclass(frozen=True)
class OdeState:
    """A point (W1, W2) in the closed positive quadrant."""

    W1: float
    W2: float

    def __post_init__(self):
        if not (np.isfinite(self.W1) and np.isfinite(self.W2)):
            raise ConfigError("ODE state must be finite")
        if self.W1 < 0.0 or self.W2 < 0.0:
            raise ConfigError(f"ODE state must be nonnegative, got ({self.W1}, {self.W2})")


def region_coefficients(params: OdeParams) -> tuple[float, float, float, float]:
    """Return (c_lo, e_lo, c_hi, e_hi) of the invariant region.

    Requires strictly positive couplings: with b1 = 0 the lower envelope
    degenerates and the region notion does not apply.
    """
    if params.b1 <= 0.0 or params.b2 <= 0.0:
        raise ConfigError("invariant region requires positive couplings b1, b2")
    c_lo = (params.b1 / (params.delta * params.a1)) ** (1.0 / (params.p - 1.0))
    e_lo = params.m / (params.p - 1.0)
    c_hi = (params.delta * params.a2 / params.b2) ** (1.0 / params.n)
    e_hi = (params.q - 1.0) / params.n
    return c_lo, e_lo, c_hi, e_hi


def region_cap(params: OdeParams) -> float:
    """Largest W2 at which the region is nonempty (inf if nonempty for all).

    The envelopes cross where c_lo W2^e_lo = c_hi W2^e_hi.  When e_lo > e_hi
    (source product strictly above diffusion product) the region closes at a
    finite height; at criticality it is a wedge that is either empty or
    unbounded.
    """
    c_lo, e_lo, c_hi, e_hi = region_coefficients(params)
    if abs(e_lo - e_hi) <= REGIME_RTOL * max(e_lo, e_hi):
        return math.inf if c_lo <= c_hi else 0.0
    if e_lo < e_hi:
        # Subcritical orientation: envelopes only open up beyond a floor.
        return math.inf
    try:
        return (c_hi / c_lo) ** (1.0 / (e_lo - e_hi))
    except OverflowError:
        # Nearly-critical exponents push the crossing beyond float range.
        return math.inf


def region_nonempty(params: OdeParams) -> tuple[bool, tuple[float, float]]:
    """Whether the region contains positive states, and the W2-interval.

    Supercritical exponents (e_lo > e_hi) close the wedge at the envelope
    crossing; at criticality the wedge is scale free and exists iff the
    lower coefficient does not exceed the upper one.
    """
    if params.m * params.n < (params.p - 1.0) * (params.q - 1.0) * (1.0 - REGIME_RTOL):
        raise ConfigError(
            "region machinery requires mn >= (p-1)(q-1), got "
            f"mn={params.m * params.n}, (p-1)(q-1)={(params.p - 1.0) * (params.q - 1.0)}"
        )
    cap = region_cap(params)
    if cap == 0.0:
        return False, (0.0, 0.0)
    return True, (0.0, cap)


def region_membership(state: OdeState, params: OdeParams) -> bool:
    """Whether the state lies in the region, with 1e-12 relative slack on
    both envelope inequalities.  The origin always belongs."""
    c_lo, e_lo, c_hi, e_hi = region_coefficients(params)
    lo = c_lo * _pw(state.W2, e_lo)
    hi = c_hi * _pw(state.W2, e_hi)
    slack = 1e-12
    return state.W1 >= lo * (1.0 - slack) and state.W1 <= hi * (1.0 + slack)


def _two_monomial_sup(c1: float, e1: float, c2: float, e2: float,
                      s_lo: float, s_hi: float) -> float:
    """sup of c1 s^e1 + c2 s^e2 (c1, c2 >= 0) over [s_lo, s_hi].

    The derivative of a positive two-monomial sum changes sign at most once,
    from - to +, so any interior critical point is a minimum and the sup
    sits at an endpoint.  s_lo = 0 is allowed and uses the one-sided limit
    (infinite when a negative exponent carries weight)."""

    def val(s: float) -> float:
        if s > 0.0:
            return c1 * s**e1 + c2 * s**e2
        out = 0.0
        for c, e in ((c1, e1), (c2, e2)):
            if c == 0.0:
                continue
            if e < 0.0:
                return math.inf
            if e == 0.0:
                out += c
        return out

    return max(val(s_lo), val(s_hi))


def region_inward_margin(params: OdeParams, w2_max: float, w2_min: float = 0.0) -> float:
    """Normalized slack of the boundary inflow conditions on the envelopes.

    Positive return means that everywhere on both envelope arcs with
    W2 in [w2_min, w2_max] the vector field points into the region, which by
    the subtangent criterion makes the truncated wedge forward invariant;
    the guaranteed-decay property then actually persists along trajectories.
    The domination structure alone does not force this: there are admissible
    coefficient sets whose wedge leaks, so callers relying on invariance
    should require a positive margin.

    On the upper envelope W1 = c_hi W2^e_hi the outward-pointing rate
    difference normalizes to

        U(s) = [b1 / (a1 c_hi^(p-1))] s^(m - a) +
               [(1-delta) a2 c_hi e_hi / (a1 c_hi^(p-1))] s^(h - a) <= 1,

    with a = e_hi (p-1) and h = e_hi + q - 2, and on the lower envelope
    W1 = c_lo W2^e_lo to

        L(s) = [b1 (1/delta - 1) / (a2 c_lo e_lo)] s^(m - b) +
               [b2 c_lo^n / a2] s^(e_lo n - (q-1)) <= 1,

    with b = e_lo + q - 2.  Both are positive two-monomial sums, so their
    sup over the interval is attained at an endpoint.  The returned margin
    is 1 - max(sup U, sup L); w2_min = 0 asks for the full wedge down to the
    origin, where any negatively-weighted exponent makes the margin -inf.
    """
    if w2_max <= 0.0 or w2_min < 0.0 or w2_min > w2_max:
        raise ConfigError(f"need 0 <= w2_min <= w2_max with w2_max > 0, got [{w2_min}, {w2_max}]")
    c_lo, e_lo, c_hi, e_hi = region_coefficients(params)
    a1, a2, b1, b2 = params.a1, params.a2, params.b1, params.b2
    p, q, m, n, delta = params.p, params.q, params.m, params.n, params.delta

    denom_hi = a1 * c_hi ** (p - 1.0)
    alpha = e_hi * (p - 1.0)
    sup_hi = _two_monomial_sup(
        b1 / denom_hi, m - alpha,
        (1.0 - delta) * a2 * c_hi * e_hi / denom_hi, e_hi + q - 2.0 - alpha,
        w2_min, w2_max,
    )

    denom_lo = a2 * c_lo * e_lo
    beta = e_lo + q - 2.0
    sup_lo = _two_monomial_sup(
        b1 * (1.0 / delta - 1.0) / denom_lo, m - beta,
        b2 * c_lo**n / a2, e_lo * n - (q - 1.0),
        w2_min, w2_max,
    )

    return 1.0 - max(sup_hi, sup_lo)


def in_region_horizon(params: OdeParams, state0: OdeState) -> float:
    """A-priori upper bound on the extinction time of an in-region start.

    Inside the region each source is at most delta times its own decay term,
    so W1 decays at least as fast as the solution of
    W' = -(1-delta) a1 W^(p-1), which vanishes by W1(0)^(2-p) / ((1-delta)
    a1 (2-p)); same for W2.  The region pinches at the origin, so extinction
    of either component forces the pair; the smaller bound applies.
    """
    t1 = state0.W1 ** (2.0 - params.p) / ((1.0 - params.delta) * params.a1 * (2.0 - params.p))
    t2 = state0.W2 ** (2.0 - params.q) / ((1.0 - params.delta) * params.a2 * (2.0 - params.q))
    return min(t1, t2)


@dataclass
class OdeTrajectory:
    """Accepted integration points with endpoint derivatives.

    states and derivs have shape (k, 2).  extinction_time is the refined
    first time max(W1, W2) fell to the extinction threshold; blow_up_time the
    refined first time max reached the runaway guard (growth system only).
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    extinction_time: float | None = None
    blow_up_time: float | None = None
    threshold: float = EXTINCTION_THRESHOLD

    @property
    def w1(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def w2(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def final_state(self) -> OdeState:
        return OdeState(float(max(self.states[-1, 0], 0.0)), float(max(self.states[-1, 1], 0.0)))

    def at(self, t: float) -> np.ndarray:
        """Cubic Hermite evaluation at time t within the recorded range.

        Past the recorded end of an extinct trajectory the final (near-zero)
        state is held; other extrapolation is refused.
        """
        times = self.times
        if t < times[0] - 1e-12:
            raise ConfigError(f"time {t} precedes trajectory start {times[0]}")
        if t >= times[-1]:
            if t <= times[-1] + 1e-12 or self.extinction_time is not None:
                return self.states[-1].copy()
            raise ConfigError(f"time {t} beyond trajectory end {times[-1]}")
        i = int(np.searchsorted(times, t, side="right") - 1)
        i = max(0, min(i, len(times) - 2))
        t0, t1 = times[i], times[i + 1]
        dt = t1 - t0
        if dt <= 0.0:
            return self.states[i].copy()
        s = (t - t0) / dt
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        val = (
            h00 * self.states[i]
            + h10 * dt * self.derivs[i]
            + h01 * self.states[i + 1]
            + h11 * dt * self.derivs[i + 1]
        )
        return np.maximum(val, 0.0)


def _rk4_probe(rhs, t0: float, y0: np.ndarray, t1: float, substeps: int = 8) -> np.ndarray:
    """Fixed-step RK4 from (t0, y0) to t1, used to refine event times."""
    y = y0.copy()
    dt = (t1 - t0) / substeps
    t = t0
    for _ in range(substeps):
        k1 = np.array(rhs(y[0], y[1]))
        y2 = np.maximum(y + 0.5 * dt * k1, 0.0)
        k2 = np.array(rhs(y2[0], y2[1]))
        y3 = np.maximum(y + 0.5 * dt * k2, 0.0)
        k3 = np.array(rhs(y3[0], y3[1]))
        y4 = np.maximum(y + dt * k3, 0.0)
        k4 = np.array(rhs(y4[0], y4[1]))
        y = np.maximum(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0)
        t += dt
    return y


def _refine_crossing(probe, t0, y0, t1, level, upward):
    """Bisect for the first time max(y) crosses `level` inside (t0, t1].

    The bracket endpoint states come from short re-integrations from the
    accepted point (t0, y0) via `probe`, so the refinement inherits the
    integrator's local accuracy rather than relying on wide-interval
    interpolation.
    """
    lo, hi = t0, t1
    for _ in range(80):
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        y_mid = probe(t0, y0, mid)
        crossed = (max(y_mid) >= level) if upward else (max(y_mid) <= level)
        if crossed:
            hi = mid
        else:
            lo = mid
    return hi


def _be_pair_step(params: OdeParams, y1: float, y2: float, dt: float):
    """One backward Euler step of the comparison system.

    Gauss-Seidel over the two scalar solves: each equation with its partner
    frozen is z + dt a z^g = R, handled exactly by _scalar_be.  Backward
    Euler is the reason the stiff tail is affordable: its fixed point rides
    the quasi-steady manifold of the collapsed component instead of
    resolving the diverging relaxation rate.  Returns None when the sweep
    fails to settle, which the caller treats as a rejection."""
    z1, z2 = y1, y2
    for _ in range(60):
        z1_new = _scalar_be(dt * params.a1, params.p - 1.0, y1 + dt * params.b1 * _pw(z2, params.m))
        z2_new = _scalar_be(dt * params.a2, params.q - 1.0, y2 + dt * params.b2 * _pw(z1_new, params.n))
        done = abs(z1_new - z1) <= 1e-13 * z1_new + 1e-300 and abs(z2_new - z2) <= 1e-13 * z2_new + 1e-300
        z1, z2 = z1_new, z2_new
        if done:
            return z1, z2
    return None


def _be_probe(params: OdeParams):
    """Probe factory: fixed-substep backward Euler for event refinement in
    the stiff tail, mirroring the RK4 probe of the explicit loop."""

    def probe(t0: float, y0: np.ndarray, t1: float, substeps: int = 16) -> np.ndarray:
        w1, w2 = float(y0[0]), float(y0[1])
        dt = (t1 - t0) / substeps
        for _ in range(substeps):
            z = _be_pair_step(params, w1, w2, dt)
            if z is None:
                za = _be_pair_step(params, w1, w2, 0.5 * dt)
                z = za if za is None else _be_pair_step(params, za[0], za[1], 0.5 * dt)
                if z is None:
                    # Refinement only sharpens the event bracket; holding the
                    # state keeps the bisection conservative.
                    z = (w1, w2)
            w1, w2 = z
        return np.array([w1, w2])

    return probe


def _integrate_be_tail(
    params: OdeParams,
    t: float,
    y: np.ndarray,
    t_max: float,
    rtol: float,
    atol: float,
    stop_level: float | None,
    stop_upward: bool,
    dt: float,
    times: list,
    states: list,
    derivs: list,
):
    """Adaptive backward-Euler continuation for stiff extinction tails.

    Near extinction the linearized decay rate a (p-1) W^(p-2) is unbounded,
    and when the exponents are skewed one component collapses many orders
    below the other, pinning an explicit stepper at its stability limit.
    Backward Euler strides over that fast mode, so steps here are sized by
    accuracy alone: error is estimated by step doubling and the extrapolated
    doubled solution is the accepted one.  Accepted points are appended to
    the same recording lists as the explicit loop.  Returns the refined
    event time or None.
    """
    rhs = params.rhs

    def crossed(vec):
        mx = float(max(vec))
        return mx >= stop_level if stop_upward else mx <= stop_level

    rejects = 0
    for _ in range(500_000):
        if t >= t_max:
            break
        dt = min(dt, t_max - t)
        if dt < 1e-15 * max(1.0, t):
            raise StepSizeError(f"implicit step size underflow at t={t}")
        z_full = _be_pair_step(params, y[0], y[1], dt)
        z_half = _be_pair_step(params, y[0], y[1], 0.5 * dt)
        z_two = None if z_half is None else _be_pair_step(params, z_half[0], z_half[1], 0.5 * dt)
        if z_full is None or z_two is None:
            rejects += 1
            if rejects > 60:
                raise StepSizeError(f"implicit sweep stalled at t={t}")
            dt *= 0.25
            continue
        tol1 = atol + rtol * max(abs(y[0]), abs(z_two[0]))
        tol2 = atol + rtol * max(abs(y[1]), abs(z_two[1]))
        err = max(abs(z_two[0] - z_full[0]) / tol1, abs(z_two[1] - z_full[1]) / tol2)
        if err <= 1.0:
            t_new = t + dt
            y_new = np.maximum(np.array([2.0 * z_two[0] - z_full[0], 2.0 * z_two[1] - z_full[1]]), 0.0)
            if stop_level is not None and crossed(y_new):
                probe = _be_probe(params)
                event_time = _refine_crossing(probe, t, y.copy(), t_new, stop_level, stop_upward)
                y_event = np.maximum(probe(t, y.copy(), event_time), 0.0)
                times.append(event_time)
                states.append(y_event)
                derivs.append(np.array(rhs(y_event[0], y_event[1])))
                return event_time
            t, y = t_new, y_new
            times.append(t)
            states.append(y.copy())
            derivs.append(np.array(rhs(y[0], y[1])))
            rejects = 0
            dt *= min(4.0, max(0.3, 0.8 * err ** (-0.5))) if err > 0.0 else 4.0
        else:
            rejects += 1
            if rejects > 60:
                raise StepSizeError(f"implicit step control stalled at t={t} (err={err:.3g})")
            dt *= max(0.15, 0.8 * err ** (-0.5))
    return None


def _integrate_adaptive(
    rhs,
    y0: np.ndarray,
    t_max: float,
    rtol: float,
    atol: float,
    stop_level: float | None,
    stop_upward: bool,
    stiff_params: OdeParams | None = None,
):
    """Embedded RK5(4) with positivity projection and event stopping.

    Returns (times, states, derivs, event_time).  stop_level triggers either
    a downward crossing of max(y) (extinction) or an upward one (blow-up);
    the crossing time is refined by bisection.

    When stiff_params is supplied and the accepted step stays
    stability-limited (far smaller than the remaining span calls for) the
    tail is handed to the split-step continuation: skewed decay exponents
    make the comparison system genuinely stiff near extinction, where the
    collapsed component's linearized rate diverges and an explicit method
    would grind through hundreds of thousands of steps.
    """
    t = 0.0
    y = np.maximum(np.asarray(y0, dtype=float), 0.0)
    f = np.array(rhs(y[0], y[1]))

    times = [t]
    states = [y.copy()]
    derivs = [f.copy()]
    event_time = None

    def crossed(vec):
        mx = float(max(vec))
        return mx >= stop_level if stop_upward else mx <= stop_level

    if stop_level is not None and crossed(y):
        return (np.array(times), np.array(states), np.array(derivs), 0.0)

    # Initial step from the rhs scale; the controller corrects it quickly.
    scale = atol + rtol * float(np.max(np.abs(y)))
    fmag = float(np.max(np.abs(f)))
    dt = min(t_max * 1e-3 if t_max > 0 else 1.0, 0.1 * scale / fmag if fmag > 0 else t_max * 1e-3)
    dt = max(dt, 1e-12)

    k = np.zeros((7, 2))
    rejects = 0
    accepted = 0
    grinding = 0
    while t < t_max:
        dt = min(dt, t_max - t)
        if dt < 1e-15 * max(1.0, t):
            raise StepSizeError(f"step size underflow at t={t}")
        k[0] = f
        for i in range(1, 7):
            yi = y + dt * (_DP_A[i] @ k[:i])
            yi = np.maximum(yi, 0.0)
            k[i] = rhs(yi[0], yi[1])
        y5 = y + dt * (_DP_B5 @ k)
        y4 = y + dt * (_DP_B4 @ k)
        err_vec = y5 - y4
        tol_vec = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.max(np.abs(err_vec) / tol_vec))

        if err <= 1.0:
            t_new = t + dt
            y_new = np.maximum(y5, 0.0)
            f_new = np.array(rhs(y_new[0], y_new[1]))
            if stop_level is not None and crossed(y_new):
                probe = lambda t0, w0, t1: _rk4_probe(rhs, t0, w0, t1)
                event_time = _refine_crossing(probe, t, y.copy(), t_new, stop_level, stop_upward)
                y_event = _rk4_probe(rhs, t, y.copy(), event_time)
                times.append(event_time)
                states.append(np.maximum(y_event, 0.0))
                derivs.append(np.array(rhs(max(y_event[0], 0.0), max(y_event[1], 0.0))))
                break
            dt_used = dt
            t, y, f = t_new, y_new, f_new
            times.append(t)
            states.append(y.copy())
            derivs.append(f.copy())
            rejects = 0
            accepted += 1
            dt *= min(5.0, max(0.2, 0.9 * err ** (-0.2))) if err > 0.0 else 5.0
            if stiff_params is not None and not stop_upward:
                # A step below remaining/50000 means stability, not accuracy,
                # is in charge; sustained grinding hands off to the split
                # tail before the step count explodes.
                grinding = grinding + 1 if dt_used < 2e-5 * (t_max - t) else 0
                if grinding >= 40 or accepted > 20_000:
                    event_time = _integrate_be_tail(
                        stiff_params, t, y.copy(), t_max, rtol, atol,
                        stop_level, stop_upward, 10.0 * dt_used,
                        times, states, derivs,
                    )
                    break
        else:
            rejects += 1
            if rejects > 60:
                raise StepSizeError(f"step control stalled at t={t} (err={err:.3g})")
            dt *= max(0.2, 0.9 * err ** (-0.2))

    if event_time is not None:
        event_time = float(event_time)
    return np.array(times), np.array(states), np.array(derivs), event_time


def integrate(
    params: OdeParams,
    state0: OdeState,
    *,
    t_max: float | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    threshold: float = EXTINCTION_THRESHOLD,
) -> OdeTrajectory:
    """Integrate the comparison system until extinction or t_max.

    Extinction means max(W1, W2) first reaching `threshold`; the crossing is
    refined by bisection and recorded as trajectory.extinction_time.  When
    t_max is omitted the start must lie in the invariant region, where an
    a-priori horizon exists; out-of-region studies must cap the time
    themselves.
    """
    if t_max is None:
        if params.b1 <= 0.0 or params.b2 <= 0.0 or not region_membership(state0, params):
            raise ConfigError(
                "t_max is required unless the initial state lies in the invariant region"
            )
        t_max = 1.5 * in_region_horizon(params, state0) + 1e-6
    if t_max <= 0.0:
        raise ConfigError(f"t_max must be positive, got {t_max}")

    times, states, derivs, event = _integrate_adaptive(
        params.rhs,
        np.array([state0.W1, state0.W2]),
        t_max,
        rtol,
        atol,
        threshold,
        stop_upward=False,
        stiff_params=params,
    )
    return OdeTrajectory(
        times=times,
        states=states,
        derivs=derivs,
        extinction_time=event,
        threshold=threshold,
    )


@dataclass(frozen=True)
class InvarianceReport:
    """Result of tracking the region inequalities along a trajectory.

    max_violation is the largest positive excursion outside either envelope,
    normalized by 1 + the state magnitude at that instant."""

    passed: bool
    max_violation: float
    t_worst: float
    extinction_time: float | None
    trajectory: OdeTrajectory = field(repr=False)


def invariance_check(
    params: OdeParams,
    state0: OdeState,
    *,
    tol: float = 1e-6,
    rtol: float = 1e-8,
    atol: float = 1e-12,
) -> InvarianceReport:
    """Integrate from an in-region start and report the worst normalized
    excursion outside the region envelopes at the accepted points."""
    if not region_membership(state0, params):
        raise ConfigError("invariance check requires an in-region initial state")
    traj = integrate(params, state0, rtol=rtol, atol=atol)
    c_lo, e_lo, c_hi, e_hi = region_coefficients(params)
    worst = 0.0
    t_worst = 0.0
    for t, (w1, w2) in zip(traj.times, traj.states):
        lo = c_lo * _pw(w2, e_lo)
        hi = c_hi * _pw(w2, e_hi)
        excursion = max(lo - w1, w1 - hi, 0.0) / (1.0 + max(w1, w2))
        if excursion > worst:
            worst = excursion
            t_worst = t
    return InvarianceReport(
        passed=worst <= tol,
        max_violation=worst,
        t_worst=float(t_worst),
        extinction_time=traj.extinction_time,
        trajectory=traj,
    )


def growth_integrate(
    m: float,
    n: float,
    state0: OdeState,
    t_end: float,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    blow_up_threshold: float = BLOW_UP_THRESHOLD,
) -> OdeTrajectory:
    """Integrate the sourceless growth system U' = V^m, V' = U^n.

    Both components are nondecreasing; they dominate the sup-norms of any
    solution whose initial data they dominate.  Integration stops early if
    max(U, V) reaches blow_up_threshold, recording blow_up_time; bounds
    derived from the trajectory are then only meaningful before that time.
    """
    if m <= 0.0 or n <= 0.0:
        raise ConfigError(f"growth exponents must be positive, got m={m}, n={n}")
    if t_end <= 0.0:
        raise ConfigError(f"t_end must be positive, got {t_end}")

    def rhs(u, v):
        return _pw(v, m), _pw(u, n)

    times, states, derivs, event = _integrate_adaptive(
        rhs,
        np.array([state0.W1, state0.W2]),
        t_end,
        rtol,
        atol,
        blow_up_threshold,
        stop_upward=True,
    )
    return OdeTrajectory(
        times=times,
        states=states,
        derivs=derivs,
        blow_up_time=event,
        threshold=blow_up_threshold,
    )


@dataclass(frozen=True)
class GSystemResult:
    """Scaled-profile comparison system and its integrated solution.

    The critical-regime supersolution takes the form (g1(t) phi_p0,
    g2(t) phi_q0) with torsion-like profiles normalized to sups M_p0, M_q0
    strictly below 1.  The profile factors obey this module's comparison
    system with a1 = 1/M_p0, b1 = M_q0^m / M_p0, a2 = 1/M_q0,
    b2 = M_p0^n / M_q0, and extinguish in finite time T0 provided the start
    lies inside the invariant window.
    """

    params: OdeParams
    g0: OdeState
    window: tuple[float, float]
    trajectory: OdeTrajectory = field(repr=False)
    T0: float = 0.0


def g_window(M_p0: float, M_q0: float, p: float, q: float, m: float, n: float,
             delta: float, g2_0: float) -> tuple[float, float]:
    """Admissible interval for g1(0) given g2(0) in the scaled system."""
    lower = (M_q0**m / delta) ** (1.0 / (p - 1.0)) * g2_0 ** (m / (p - 1.0))
    upper = (delta / M_p0**n) ** (1.0 / n) * g2_0 ** ((q - 1.0) / n)
    return lower, upper


def g_system(
    M_p0: float,
    M_q0: float,
    p: float,
    q: float,
    m: float,
    n: float,
    delta: float,
    *,
    g2_0: float = 1.0,
    g1_0: float | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-12,
) -> GSystemResult:
    """Build and integrate the scaled-profile system of the critical regime.

    Preconditions: exponents critical (m n = (p-1)(q-1) up to rounding),
    profile sups in (0, 1), and M_q0^m M_p0^n < delta^2 < 1.  g1_0 defaults
    to the geometric midpoint of the admissible window; a caller-supplied
    value outside the window is rejected with the interval in the message.
    """
    if not (0.0 < M_p0 < 1.0 and 0.0 < M_q0 < 1.0):
        raise ConfigError(
            f"profile sups must lie in (0, 1), got M_p0={M_p0}, M_q0={M_q0}; "
            "shrink the domain extension until the profiles stay below 1"
        )
    source = m * n
    diffusion = (p - 1.0) * (q - 1.0)
    if abs(source - diffusion) > REGIME_RTOL * max(source, diffusion):
        raise ConfigError(
            f"scaled-profile system requires critical exponents, got m*n={source} "
            f"vs (p-1)*(q-1)={diffusion}"
        )
    product = M_q0**m * M_p0**n
    if not (product < delta**2 < 1.0):
        raise ConfigError(
            f"need M_q0^m * M_p0^n < delta^2 < 1, got product={product}, delta^2={delta**2}"
        )
    if g2_0 <= 0.0:
        raise ConfigError(f"g2(0) must be positive, got {g2_0}")

    lower, upper = g_window(M_p0, M_q0, p, q, m, n, delta, g2_0)
    if lower > upper * (1.0 + 1e-12):
        raise ConfigError(
            f"empty admissible window [{lower}, {upper}] for g1(0); increase delta"
        )
    if g1_0 is None:
        g1_0 = math.sqrt(lower * upper)
    elif not (lower * (1.0 - 1e-12) <= g1_0 <= upper * (1.0 + 1e-12)):
        raise ConfigError(
            f"g1(0)={g1_0} outside the admissible window [{lower}, {upper}]"
        )

    params = OdeParams(
        a1=1.0 / M_p0,
        b1=M_q0**m / M_p0,
        a2=1.0 / M_q0,
        b2=M_p0**n / M_q0,
        p=p,
        q=q,
        m=m,
        n=n,
        delta=delta,
    )
    g0 = OdeState(g1_0, g2_0)
    traj = integrate(params, g0, rtol=rtol, atol=atol)
    if traj.extinction_time is None:
        raise StepSizeError("scaled-profile system failed to extinguish within its horizon")
    return GSystemResult(
        params=params,
        g0=g0,
        window=(lower, upper),
        trajectory=traj,
        T0=traj.extinction_time,
    )
