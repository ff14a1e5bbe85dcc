"""Problem parameters, regime classification, and discrete 1-D fields.

The object of study is the coupled degenerate parabolic system

    u_t = (|u_x|^(p-2) u_x)_x + v^m
    v_t = (|v_x|^(q-2) v_x)_x + u^n

on an interval with zero Dirichlet data, in the fast-diffusion range
1 < p, q < 2 with positive coupling exponents m, n.  This module holds the
parameter container, the classification of (p, q, m, n) into behavioural
regimes, and the uniform-grid field types plus the norms used everywhere
else in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError

# Criticality is an exact-arithmetic concept; equality of the exponent
# products is decided up to rounding noise only.
REGIME_RTOL = 1e-12


class RegimeClass(Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    SUBCRITICAL = "subcritical"


class SupercriticalCase(Enum):
    """Split of the supercritical regime by the size of the source product."""

    CASE_I = "mn_le_1"
    CASE_II = "mn_gt_1"


@dataclass(frozen=True)
class SystemParams:
    """Exponents and spatial interval of the coupled system.

    p, q are the diffusion exponents (fast-diffusion range, strictly between
    1 and 2) and m, n the source coupling exponents (positive).  The spatial
    domain is the open interval (x_lo, x_hi).
    """

    p: float
    q: float
    m: float
    n: float
    x_lo: float = 0.0
    x_hi: float = 1.0

    def __post_init__(self):
        if not (1.0 < self.p < 2.0):
            raise ConfigError(f"diffusion exponent p must lie in (1, 2), got {self.p}")
        if not (1.0 < self.q < 2.0):
            raise ConfigError(f"diffusion exponent q must lie in (1, 2), got {self.q}")
        if not self.m > 0.0:
            raise ConfigError(f"source exponent m must be positive, got {self.m}")
        if not self.n > 0.0:
            raise ConfigError(f"source exponent n must be positive, got {self.n}")
        if not (np.isfinite(self.x_lo) and np.isfinite(self.x_hi) and self.x_hi > self.x_lo):
            raise ConfigError(f"domain requires x_hi > x_lo, got ({self.x_lo}, {self.x_hi})")

    @property
    def measure(self) -> float:
        """Length of the spatial interval."""
        return self.x_hi - self.x_lo


@dataclass(frozen=True)
class Regime:
    """Outcome of classifying a parameter set.

    kind separates sub/critical/supercritical by comparing the source
    product m*n against the diffusion product (p-1)*(q-1).  For the
    supercritical regime, case records whether the sources are weak
    (m*n <= 1) or strong (m*n > 1), which selects different comparison
    constructions downstream.  nonextinction_eligible marks the symmetric
    weak-coupling corner (p = q, m, n <= p-1, m*n < (p-1)^2) where positive
    solutions can be bounded away from zero.
    """

    kind: RegimeClass
    case: SupercriticalCase | None
    nonextinction_eligible: bool

    def describe(self) -> str:
        bits = [self.kind.value]
        if self.case is not None:
            bits.append("case I" if self.case is SupercriticalCase.CASE_I else "case II")
        if self.nonextinction_eligible:
            bits.append("nonextinction-eligible")
        return ", ".join(bits)


def classify_regime(params: SystemParams) -> Regime:
    """Classify exponents by source strength relative to diffusion.

    The split compares m*n with (p-1)*(q-1); ties within REGIME_RTOL
    (relative) count as critical.  Eligibility for the nonextinction
    construction is an independent flag and requires p = q up to the same
    relative tolerance.
    """
    source = params.m * params.n
    diffusion = (params.p - 1.0) * (params.q - 1.0)
    gap = source - diffusion
    scale = max(abs(source), abs(diffusion))

    if abs(gap) <= REGIME_RTOL * scale:
        kind = RegimeClass.CRITICAL
        case = None
    elif gap > 0.0:
        kind = RegimeClass.SUPERCRITICAL
        case = (
            SupercriticalCase.CASE_I
            if source <= 1.0 + REGIME_RTOL
            else SupercriticalCase.CASE_II
        )
    else:
        kind = RegimeClass.SUBCRITICAL
        case = None

    same_pq = abs(params.p - params.q) <= REGIME_RTOL * max(params.p, params.q)
    pm1 = params.p - 1.0
    eligible = (
        same_pq
        and params.m <= pm1
        and params.n <= pm1
        and source < pm1 * pm1
    )
    return Regime(kind=kind, case=case, nonextinction_eligible=eligible)


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on [x_lo, x_hi] with n_cells cells."""

    x_lo: float
    x_hi: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.x_lo) and np.isfinite(self.x_hi) and self.x_hi > self.x_lo):
            raise ConfigError(f"grid requires x_hi > x_lo, got ({self.x_lo}, {self.x_hi})")
        if self.n_cells < 4:
            raise ConfigError(f"grid needs at least 4 cells, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def nodes(self) -> np.ndarray:
        """All n_cells + 1 node coordinates, boundary included."""
        return np.linspace(self.x_lo, self.x_hi, self.n_cells + 1)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @staticmethod
    def for_params(params: SystemParams, n_cells: int) -> "Grid":
        return Grid(params.x_lo, params.x_hi, n_cells)


@dataclass(frozen=True)
class Field:
    """Nodal scalar field with a single shared Dirichlet boundary value.

    interior_values holds the n_cells - 1 interior nodes; both endpoints
    carry boundary_value.  Values are validated finite and the boundary
    value nonnegative (solution components are nonnegative throughout the
    package; interior values may dip microscopically negative only through
    roundoff and are the stepper's responsibility to clamp).
    """

    grid: Grid
    interior_values: np.ndarray
    boundary_value: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.interior_values, dtype=float)
        if vals.shape != (self.grid.n_interior,):
            raise ConfigError(
                f"field needs {self.grid.n_interior} interior values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ConfigError("field values must be finite")
        if not (np.isfinite(self.boundary_value) and self.boundary_value >= 0.0):
            raise ConfigError(f"boundary value must be finite and >= 0, got {self.boundary_value}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "interior_values", vals)

    @property
    def values(self) -> np.ndarray:
        """All nodal values including both boundary endpoints."""
        out = np.empty(self.grid.n_cells + 1)
        out[0] = out[-1] = self.boundary_value
        out[1:-1] = self.interior_values
        return out

    @staticmethod
    def zeros(grid: Grid, boundary_value: float = 0.0) -> "Field":
        return Field(grid, np.zeros(grid.n_interior), boundary_value)

    @staticmethod
    def from_callable(grid: Grid, fn, boundary_value: float = 0.0) -> "Field":
        return Field(grid, np.asarray(fn(grid.interior_nodes), dtype=float), boundary_value)

    def scaled(self, factor: float) -> "Field":
        return Field(self.grid, factor * self.interior_values, factor * self.boundary_value)


@dataclass(frozen=True)
class StatePair:
    """The two solution components at one time level, on a shared grid."""

    u: Field
    v: Field

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ConfigError("state components must share a grid")

    @property
    def grid(self) -> Grid:
        return self.u.grid


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Quadrature weights over all nodes: h at interior, h/2 at endpoints."""
    w = np.full(grid.n_cells + 1, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def lp_norm(field: Field, s: float) -> float:
    """Trapezoid-rule L^s norm over the interval, s >= 1."""
    if not (np.isfinite(s) and s >= 1.0):
        raise ConfigError(f"norm exponent must satisfy s >= 1, got {s}")
    w = trapezoid_weights(field.grid)
    vals = np.abs(field.values)
    return float(np.sum(w * vals**s) ** (1.0 / s))


def sup_norm(field: Field) -> float:
    """Maximum nodal absolute value, boundary included."""
    return float(np.max(np.abs(field.values)))
