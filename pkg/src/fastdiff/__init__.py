"""fastdiff: a numerical laboratory for coupled 1-D fast-diffusion systems.

The package simulates the Dirichlet problem for

    u_t = (|u_x|^(p-2) u_x)_x + v^m
    v_t = (|v_x|^(q-2) v_x)_x + u^n,    1 < p, q < 2,  m, n > 0,

classifies parameter regimes, evaluates sufficient conditions for
finite-time extinction through a comparison ODE system, and constructs the
sub/supersolution pairs used to corroborate extinction and nonextinction
numerically.
"""

from .core import (
    Field,
    Grid,
    Regime,
    RegimeClass,
    StatePair,
    SupercriticalCase,
    SystemParams,
    classify_regime,
    lp_norm,
    sup_norm,
)
from .errors import (
    BlowUpError,
    ConfigError,
    ConvergenceError,
    FastDiffError,
    NumericalError,
    StepSizeError,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "ConfigError",
    "ConvergenceError",
    "FastDiffError",
    "Field",
    "Grid",
    "NumericalError",
    "Regime",
    "RegimeClass",
    "StatePair",
    "StepSizeError",
    "SupercriticalCase",
    "SystemParams",
    "classify_regime",
    "lp_norm",
    "sup_norm",
    "__version__",
]
