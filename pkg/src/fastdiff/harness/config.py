"""Experiment configuration: TOML files mapped onto validated dataclasses.

The file layout mirrors the dataclass layout one-to-one:

    [system]   p, q, m, n, x_lo, x_hi
    [grid]     n_cells
    [solver]   dt, t_max, eps_reg, picard_tol, picard_max, extinction_tol,
               snapshot_every, stop_at_extinction
    [initial]  kind (zero|sine|eigenfunction|torsion|bump), amp_u, amp_v,
               center, width
    [norms]    mode (auto|explicit), s, r
    [criteria] delta1, delta0, seed, embedding_checks, ode_cross_check

Unknown sections or keys are rejected so typos fail loudly, with the file
path and key in the message.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..core import SystemParams
from ..errors import ConfigError
from ..parabolic import SolverConfig

INITIAL_KINDS = ("zero", "sine", "eigenfunction", "torsion", "bump")

_REQUIRED = object()


@dataclass(frozen=True)
class InitialSpec:
    """Shape and amplitudes of the initial pair.

    sine and eigenfunction/torsion kinds scale a sup-normalized profile;
    bump is a compactly supported quartic bump at `center` with half-width
    `width` (defaults: interval midpoint, quarter length).
    """

    kind: str
    amp_u: float
    amp_v: float
    center: float | None = None
    width: float | None = None

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial kind must be one of {INITIAL_KINDS}, got {self.kind!r}")
        if self.amp_u < 0.0 or self.amp_v < 0.0:
            raise ConfigError("initial amplitudes must be >= 0")


@dataclass(frozen=True)
class NormSpec:
    """Norm exponents: chosen per-regime ('auto') or pinned explicitly."""

    mode: str = "auto"
    s: float | None = None
    r: float | None = None

    def __post_init__(self):
        if self.mode not in ("auto", "explicit"):
            raise ConfigError(f"norms mode must be 'auto' or 'explicit', got {self.mode!r}")
        if self.mode == "explicit" and (self.s is None or self.r is None):
            raise ConfigError("explicit norms need both s and r")


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams
    n_cells: int
    solver: SolverConfig
    initial: InitialSpec
    norms: NormSpec
    delta1: float = 0.5
    delta0: float = 0.1
    seed: int = 0
    embedding_checks: int = 100
    ode_cross_check: bool = True

    def __post_init__(self):
        if self.n_cells < 4:
            raise ConfigError(f"n_cells must be >= 4, got {self.n_cells}")
        if not (0.0 < self.delta1 < 1.0):
            raise ConfigError(f"delta1 must lie in (0, 1), got {self.delta1}")
        if self.delta0 <= 0.0:
            raise ConfigError(f"delta0 must be positive, got {self.delta0}")
        if self.embedding_checks < 0:
            raise ConfigError("embedding_checks must be >= 0")


class _Section:
    """One config table with strict key accounting."""

    def __init__(self, name: str, data: dict, where: str):
        self.name = name
        self.data = dict(data)
        self.where = where

    def take(self, key: str, kind: type, default=_REQUIRED):
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"{self.where}: [{self.name}] is missing required key {key!r}")
            return default
        val = self.data.pop(key)
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if kind is int and isinstance(val, bool):
            raise ConfigError(f"{self.where}: [{self.name}].{key} must be an integer")
        if not isinstance(val, kind):
            raise ConfigError(
                f"{self.where}: [{self.name}].{key} must be {kind.__name__}, got {type(val).__name__}"
            )
        return val

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            raise ConfigError(f"{self.where}: [{self.name}] has unknown keys: {extra}")


def parse_config(raw: dict, where: str = "<config>") -> ExperimentConfig:
    """Validate a parsed TOML mapping into an ExperimentConfig."""
    known = {"system", "grid", "solver", "initial", "norms", "criteria"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{where}: unknown sections: {', '.join(sorted(extra))}")
    for required in ("system", "grid", "solver", "initial"):
        if required not in raw:
            raise ConfigError(f"{where}: missing required section [{required}]")

    sec = _Section("system", raw["system"], where)
    params = SystemParams(
        p=sec.take("p", float),
        q=sec.take("q", float),
        m=sec.take("m", float),
        n=sec.take("n", float),
        x_lo=sec.take("x_lo", float, 0.0),
        x_hi=sec.take("x_hi", float, 1.0),
    )
    sec.finish()

    sec = _Section("grid", raw["grid"], where)
    n_cells = sec.take("n_cells", int)
    sec.finish()

    sec = _Section("solver", raw["solver"], where)
    # Omitted keys fall through to the SolverConfig defaults so the file
    # layer and the dataclass can never disagree.
    solver_kwargs = {"dt": sec.take("dt", float), "t_max": sec.take("t_max", float)}
    for key, kind in (
        ("eps_reg", float),
        ("picard_tol", float),
        ("picard_max", int),
        ("extinction_tol", float),
        ("snapshot_every", int),
        ("stop_at_extinction", bool),
    ):
        val = sec.take(key, kind, None)
        if val is not None:
            solver_kwargs[key] = val
    solver = SolverConfig(**solver_kwargs)
    sec.finish()

    sec = _Section("initial", raw["initial"], where)
    initial = InitialSpec(
        kind=sec.take("kind", str),
        amp_u=sec.take("amp_u", float),
        amp_v=sec.take("amp_v", float),
        center=sec.take("center", float, None),
        width=sec.take("width", float, None),
    )
    sec.finish()

    if "norms" in raw:
        sec = _Section("norms", raw["norms"], where)
        norms = NormSpec(
            mode=sec.take("mode", str, "auto"),
            s=sec.take("s", float, None),
            r=sec.take("r", float, None),
        )
        sec.finish()
    else:
        norms = NormSpec()

    kwargs = {}
    if "criteria" in raw:
        sec = _Section("criteria", raw["criteria"], where)
        kwargs = {
            "delta1": sec.take("delta1", float, 0.5),
            "delta0": sec.take("delta0", float, 0.1),
            "seed": sec.take("seed", int, 0),
            "embedding_checks": sec.take("embedding_checks", int, 100),
            "ode_cross_check": sec.take("ode_cross_check", bool, True),
        }
        sec.finish()

    return ExperimentConfig(
        params=params,
        n_cells=n_cells,
        solver=solver,
        initial=initial,
        norms=norms,
        **kwargs,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return parse_config(raw, where=str(path))


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-type echo of a config (for reports and round-tripping)."""
    return {
        "system": {
            "p": config.params.p,
            "q": config.params.q,
            "m": config.params.m,
            "n": config.params.n,
            "x_lo": config.params.x_lo,
            "x_hi": config.params.x_hi,
        },
        "grid": {"n_cells": config.n_cells},
        "solver": {
            "dt": config.solver.dt,
            "t_max": config.solver.t_max,
            "eps_reg": config.solver.eps_reg,
            "picard_tol": config.solver.picard_tol,
            "picard_max": config.solver.picard_max,
            "extinction_tol": config.solver.extinction_tol,
            "snapshot_every": config.solver.snapshot_every,
            "stop_at_extinction": config.solver.stop_at_extinction,
        },
        "initial": {
            "kind": config.initial.kind,
            "amp_u": config.initial.amp_u,
            "amp_v": config.initial.amp_v,
            "center": config.initial.center,
            "width": config.initial.width,
        },
        "norms": {"mode": config.norms.mode, "s": config.norms.s, "r": config.norms.r},
        "criteria": {
            "delta1": config.delta1,
            "delta0": config.delta0,
            "seed": config.seed,
            "embedding_checks": config.embedding_checks,
            "ode_cross_check": config.ode_cross_check,
        },
    }
