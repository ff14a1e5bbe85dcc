"""Stationary 1-D p-Laplacian solves: torsion profiles and first eigenpair.

In one dimension the Dirichlet problem -(phi(w'))' = rhs integrates exactly
at the discrete level: the flux at the half-nodes is C - h cumsum(rhs) up to
a single constant C, the regularized flux phi(g) = (g^2 + eps)^((p-2)/2) g
is strictly increasing and inverts nodewise by bisection, and the remaining
closure (the reconstructed profile must hit the right boundary value) is a
strictly increasing scalar equation for C.  No iteration on the profile is
involved, so the solve cannot stall, at any p in (1, 2] or grid size.

Convergence is judged on the residual of the regularized system, with a
rounding-floor allowance: near a flat profile top the tangent coefficient
phi'(0) = eps^((p-2)/2) is enormous, so re-evaluating the residual from the
rounded profile amplifies unit roundoff by phi'/h^2 and the measured
residual of even the exact double-precision solution sits well above an
aggressive tolerance on fine grids.  The achieved residual is reported
honestly; callers comparing residuals must use the same floor.

The fast-diffusion range needs 1 < p < 2, but p = 2 is accepted here so the
linear limits (quadratic torsion profile, sine eigenfunction with lambda =
pi^2 / L^2) can validate the machinery against closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import Field, Grid
from .errors import ConfigError, ConvergenceError

_EPS_FINAL = 1e-12
_STALL_ACCEPT = 1e3


def _check_p(p: float) -> None:
    if not (1.0 < p <= 2.0):
        raise ConfigError(f"elliptic solves require 1 < p <= 2, got p={p}")


def _residual(w: np.ndarray, bc: float, rhs: np.ndarray, h: float, p: float,
              eps: float) -> np.ndarray:
    """Residual of -(((g^2+eps)^((p-2)/2)) g)' = rhs at interior nodes."""
    ext = np.empty(w.size + 2)
    ext[0] = ext[-1] = bc
    ext[1:-1] = w
    g = np.diff(ext) / h
    flux = (g * g + eps) ** (0.5 * (p - 2.0)) * g
    return (flux[1:] - flux[:-1]) / h + rhs


def _phi(g: np.ndarray, p: float, eps: float) -> np.ndarray:
    return (g * g + eps) ** (0.5 * (p - 2.0)) * g


def _phi_prime(g: np.ndarray, p: float, eps: float) -> np.ndarray:
    return (g * g + eps) ** (0.5 * (p - 4.0)) * ((p - 1.0) * g * g + eps)


def _phi_inv(F: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Elementwise inverse of the regularized flux.

    phi is odd and strictly increasing, and phi(g) <= g^(p-1) for g >= 0, so
    |F|^(1/(p-1)) starts below the root; doubling finds an upper bracket and
    bisection saturates double precision.
    """
    Fa = np.abs(F)
    lo = np.zeros_like(Fa)
    hi = np.maximum(Fa ** (1.0 / (p - 1.0)), np.sqrt(eps))
    for _ in range(200):
        low = _phi(hi, p, eps) < Fa
        if not low.any():
            break
        hi[low] *= 2.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        small = _phi(mid, p, eps) < Fa
        lo = np.where(small, mid, lo)
        hi = np.where(small, hi, mid)
    return np.sign(F) * 0.5 * (lo + hi)


def _residual_floor(w: np.ndarray, bc: float, h: float, p: float,
                    eps: float) -> float:
    """Rounding floor of the evaluated residual.

    The profile carries relative rounding u; forming the gradient divides it
    by h, the flux multiplies by phi'(g), and the flux difference divides by
    h again.  Near a flat top phi'(0) = eps^((p-2)/2) is huge, so this floor
    dominates any fixed tolerance on fine grids and must be granted when
    judging convergence.
    """
    ext = np.empty(w.size + 2)
    ext[0] = ext[-1] = bc
    ext[1:-1] = w
    g = np.diff(ext) / h
    amp = float(np.max(_phi_prime(g, p, eps)))
    scale = max(float(np.max(np.abs(ext))), 1e-30)
    return 8.0 * np.finfo(float).eps * amp * scale / (h * h)


def solve_plaplace_dirichlet(
    p: float,
    rhs: np.ndarray,
    grid: Grid,
    *,
    boundary_value: float = 0.0,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[np.ndarray, float, int]:
    """Solve -(|w'|^(p-2) w')' = rhs with constant Dirichlet data.

    Returns (interior values, final residual sup, closure evaluations).
    rhs is an array over interior nodes.  The solve is direct: flux
    integration, nodewise flux inversion, and a bracketed scalar root find
    for the flux constant, so the residual lands at the rounding floor of
    the grid and tol only decides when to raise.
    """
    _check_p(p)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (grid.n_interior,):
        raise ConfigError(f"rhs needs shape ({grid.n_interior},), got {rhs.shape}")
    if not np.all(np.isfinite(rhs)):
        raise ConfigError("rhs must be finite")

    h = grid.h
    bc = boundary_value
    target = tol * (1.0 + float(np.max(np.abs(rhs))))

    # Interior equation i: -(F[i+1] - F[i])/h = rhs[i] with F the flux at
    # the half-nodes, so F[i] = C - h * cumsum(rhs) up to the constant C.
    S = h * np.concatenate(([0.0], np.cumsum(rhs)))
    evals = 0

    def gap(C):
        # Reconstruction mismatch at the right boundary; strictly
        # increasing in C since phi_inv is.
        nonlocal evals
        evals += 1
        return h * float(np.sum(_phi_inv(C - S, p, _EPS_FINAL)))

    span = float(np.max(S) - np.min(S))
    lo = float(np.min(S)) - (1.0 + span)
    hi = float(np.max(S)) + (1.0 + span)
    C = brentq(gap, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps,
               maxiter=max_iter)

    # A few monotone Newton corrections push the closure gap to the noise
    # floor; the derivative sums the inverse tangent coefficients.
    for _ in range(3):
        g = _phi_inv(C - S, p, _EPS_FINAL)
        miss = h * float(np.sum(g))
        dC = h * float(np.sum(1.0 / _phi_prime(g, p, _EPS_FINAL)))
        if miss == 0.0 or dC == 0.0:
            break
        C -= miss / dC

    g = _phi_inv(C - S, p, _EPS_FINAL)
    w = bc + h * np.cumsum(g[:-1])

    r = float(np.max(np.abs(_residual(w, bc, rhs, h, p, _EPS_FINAL))))
    floor = _residual_floor(w, bc, h, p, _EPS_FINAL)
    if r > _STALL_ACCEPT * (target + floor):
        raise ConvergenceError(
            f"p-Laplace solve landed at residual {r:.3e} "
            f"(target {target:.3e}, rounding floor {floor:.3e})",
            iterations=evals,
            residual=r,
        )
    return w, r, evals


@dataclass(frozen=True)
class TorsionSolution:
    """Profile solving -(|phi'|^(p-2) phi')' = 1 with phi = delta0 on the
    boundary.  Concave, symmetric, maximal at the interval midpoint."""

    p: float
    boundary_value: float
    phi: Field
    residual: float
    sweeps: int

    @property
    def sup(self) -> float:
        return max(float(np.max(self.phi.interior_values)), self.boundary_value)


def solve_torsion(
    p: float,
    delta0: float,
    grid: Grid,
    *,
    tol: float = 1e-10,
) -> TorsionSolution:
    """Solve the unit-source Dirichlet problem lifted by delta0 >= 0.

    The closed form on an interval of radius R centered at c is
    delta0 + ((p-1)/p) (R^(p/(p-1)) - |x-c|^(p/(p-1))); the discrete answer
    must agree to truncation order, which the test suite pins.
    """
    _check_p(p)
    if delta0 < 0.0 or not np.isfinite(delta0):
        raise ConfigError(f"boundary lift must be finite and >= 0, got {delta0}")
    rhs = np.ones(grid.n_interior)
    w, r, sweeps = solve_plaplace_dirichlet(
        p, rhs, grid, boundary_value=delta0, tol=tol
    )
    return TorsionSolution(
        p=p,
        boundary_value=delta0,
        phi=Field(grid, w, boundary_value=delta0),
        residual=r,
        sweeps=sweeps,
    )


@dataclass(frozen=True)
class EigenPair:
    """First Dirichlet eigenpair of -(|w'|^(p-2) w')' = lam |w|^(p-2) w.

    phi is positive in the interior and sup-normalized to 1.  lam is the
    discrete Rayleigh quotient of phi."""

    p: float
    lam: float
    phi: Field
    iterations: int


def rayleigh_quotient(p: float, w: np.ndarray, grid: Grid) -> float:
    """Discrete Rayleigh quotient: p-Dirichlet energy over L^p mass, zero
    boundary data."""
    h = grid.h
    ext = np.empty(w.size + 2)
    ext[0] = ext[-1] = 0.0
    ext[1:-1] = w
    g = np.diff(ext) / h
    num = h * float(np.sum(np.abs(g) ** p))
    den = h * float(np.sum(np.abs(w) ** p))
    if den <= 0.0:
        raise ConfigError("Rayleigh quotient of the zero field is undefined")
    return num / den


def first_eigenpair(
    p: float,
    grid: Grid,
    *,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> EigenPair:
    """Inverse iteration for the first eigenpair.

    Each step solves -(|z'|^(p-2) z')' = lam_k w_k^(p-1) and renormalizes to
    sup 1; lam is refreshed from the Rayleigh quotient.  Stops on the
    nodewise equation residual of the pair (relative to lam), not on
    eigenvalue stationarity: the Rayleigh quotient is quadratically accurate
    in the profile error, so it settles long before the profile does, and
    downstream comparison constructions consume the profile pointwise.  The
    p = 2 limit must reproduce lam = (pi/L)^2 and the sine profile to
    truncation order.
    """
    _check_p(p)
    x = grid.interior_nodes
    L = grid.x_hi - grid.x_lo
    w = np.sin(np.pi * (x - grid.x_lo) / L)
    w /= np.max(w)
    lam = rayleigh_quotient(p, w, grid)

    inner_tol = min(1e-11, 0.01 * tol)
    for it in range(1, max_iter + 1):
        rhs = lam * np.maximum(w, 0.0) ** (p - 1.0)
        z, _, _ = solve_plaplace_dirichlet(p, rhs, grid, tol=inner_tol)
        if np.min(z) <= 0.0:
            raise ConvergenceError(
                "inverse iteration lost interior positivity", iterations=it
            )
        w = z / np.max(z)
        lam = rayleigh_quotient(p, w, grid)
        eqn_resid = float(
            np.max(np.abs(_residual(w, 0.0, lam * w ** (p - 1.0), grid.h, p, _EPS_FINAL)))
        )
        # The flat top pins the evaluable residual at the rounding floor,
        # which can exceed tol * lam on fine grids; grant it.
        floor = _residual_floor(w, 0.0, grid.h, p, _EPS_FINAL)
        if eqn_resid <= tol * lam + floor:
            return EigenPair(p=p, lam=lam, phi=Field(grid, w), iterations=it)
    raise ConvergenceError(
        f"eigen iteration did not settle within {max_iter} steps",
        iterations=max_iter,
        residual=eqn_resid,
    )
