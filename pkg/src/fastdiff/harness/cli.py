"""Command-line interface.

Subcommands: simulate, sweep, ode, elliptic, eigen, classify.  Exit codes:
0 on success, 2 for configuration/usage errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..core import Grid, SystemParams, classify_regime
from ..elliptic import first_eigenpair, solve_torsion
from ..errors import ConfigError, NumericalError
from ..odecmp import OdeParams, OdeState, integrate, region_membership
from .config import load_config
from .export import export
from .run import parse_axis, run, sweep


def _profile_csv(path: str, xs: np.ndarray, values: np.ndarray) -> None:
    rows = ["x,value"]
    rows += [f"{repr(float(x))},{repr(float(v))}" for x, v in zip(xs, values)]
    Path(path).write_text("\n".join(rows) + "\n")


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    report = run(config)
    for line in report.summary_lines():
        print(line)
    if args.out:
        for path in export(report, args.out):
            print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    axes = [parse_axis(text) for text in args.axis]
    result = sweep(config, axes, workers=args.workers)
    for line in result.table_lines():
        print(line)
    failed = sum(1 for c in result.cells if c["verdict"] == "failed")
    if failed:
        print(f"{failed} of {len(result.cells)} cells failed; see the JSON for messages")
    if args.out:
        for path in export(result, args.out):
            print(f"wrote {path}")
    return 0


def cmd_ode(args) -> int:
    params = OdeParams(
        a1=args.a1, b1=args.b1, a2=args.a2, b2=args.b2,
        p=args.p, q=args.q, m=args.m, n=args.n, delta=args.delta,
    )
    state0 = OdeState(args.w1, args.w2)
    in_region = region_membership(state0, params) if args.b1 > 0 and args.b2 > 0 else False
    print(f"initial state in invariant region: {in_region}")
    traj = integrate(params, state0, t_max=args.t_max)
    if traj.extinction_time is not None:
        print(f"extinction time: {traj.extinction_time!r}")
    else:
        final = traj.final_state
        print(
            f"no extinction by t={args.t_max}; final state "
            f"W1={final.W1!r}, W2={final.W2!r}"
        )
    if args.csv:
        rows = ["t,W1,W2"]
        rows += [
            f"{repr(float(t))},{repr(float(w1))},{repr(float(w2))}"
            for t, (w1, w2) in zip(traj.times, traj.states)
        ]
        Path(args.csv).write_text("\n".join(rows) + "\n")
        print(f"wrote {args.csv}")
    return 0


def cmd_elliptic(args) -> int:
    grid = Grid(args.x_lo, args.x_hi, args.cells)
    sol = solve_torsion(args.p, args.delta0, grid, tol=args.tol)
    print(f"sup: {sol.sup!r}")
    print(f"residual: {sol.residual!r} ({sol.sweeps} sweeps)")
    if args.csv:
        _profile_csv(args.csv, grid.nodes, sol.phi.values)
        print(f"wrote {args.csv}")
    return 0


def cmd_eigen(args) -> int:
    grid = Grid(args.x_lo, args.x_hi, args.cells)
    pair = first_eigenpair(args.p, grid, tol=args.tol)
    print(f"lambda1: {pair.lam!r} ({pair.iterations} iterations)")
    if args.csv:
        _profile_csv(args.csv, grid.nodes, pair.phi.values)
        print(f"wrote {args.csv}")
    return 0


def cmd_classify(args) -> int:
    params = SystemParams(p=args.p, q=args.q, m=args.m, n=args.n)
    regime = classify_regime(params)
    print(f"regime: {regime.describe()}")
    print(f"source product m*n = {params.m * params.n!r}")
    print(f"diffusion product (p-1)*(q-1) = {(params.p - 1) * (params.q - 1)!r}")
    print(f"nonextinction eligible: {regime.nonextinction_eligible}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastdiff",
        description="Finite-time extinction laboratory for coupled 1-D "
        "fast-diffusion systems.",
    )
    parser.add_argument("--version", action="version", version=f"fastdiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p_sim = sub.add_parser(
        "simulate", help="run one configured experiment", formatter_class=fmt
    )
    p_sim.add_argument("--config", required=True, help="TOML experiment file")
    p_sim.add_argument("--out", default=None, help="output prefix for .json/.csv")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser(
        "sweep", help="run a cartesian parameter sweep", formatter_class=fmt
    )
    p_sweep.add_argument("--config", required=True, help="TOML experiment file")
    p_sweep.add_argument(
        "--axis",
        action="append",
        required=True,
        help="axis spec name=lo:hi:count over p, q, m, or n (repeatable)",
    )
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="process count (default: cpu count; env FASTDIFF_WORKERS caps it)")
    p_sweep.add_argument("--out", default=None, help="output prefix for .json")
    p_sweep.set_defaults(func=cmd_sweep)

    p_ode = sub.add_parser(
        "ode", help="integrate the comparison ODE system", formatter_class=fmt
    )
    for name, default in (
        ("--a1", None), ("--b1", None), ("--a2", None), ("--b2", None),
        ("--p", None), ("--q", None), ("--m", None), ("--n", None),
        ("--delta", 0.5),
    ):
        required = default is None
        p_ode.add_argument(name, type=float, required=required, default=default)
    p_ode.add_argument("--w1", type=float, required=True, help="initial W1")
    p_ode.add_argument("--w2", type=float, required=True, help="initial W2")
    p_ode.add_argument("--t-max", type=float, default=100.0, help="integration horizon")
    p_ode.add_argument("--csv", default=None, help="write the trajectory as CSV")
    p_ode.set_defaults(func=cmd_ode)

    p_ell = sub.add_parser(
        "elliptic", help="solve the unit-source stationary profile", formatter_class=fmt
    )
    p_ell.add_argument("--p", type=float, required=True)
    p_ell.add_argument("--delta0", type=float, default=0.0, help="boundary lift")
    p_ell.add_argument("--cells", type=int, default=256)
    p_ell.add_argument("--x-lo", type=float, default=0.0)
    p_ell.add_argument("--x-hi", type=float, default=1.0)
    p_ell.add_argument("--tol", type=float, default=1e-10)
    p_ell.add_argument("--csv", default=None, help="write the profile as CSV")
    p_ell.set_defaults(func=cmd_elliptic)

    p_eig = sub.add_parser(
        "eigen", help="compute the first Dirichlet eigenpair", formatter_class=fmt
    )
    p_eig.add_argument("--p", type=float, required=True)
    p_eig.add_argument("--cells", type=int, default=256)
    p_eig.add_argument("--x-lo", type=float, default=0.0)
    p_eig.add_argument("--x-hi", type=float, default=1.0)
    p_eig.add_argument("--tol", type=float, default=1e-8)
    p_eig.add_argument("--csv", default=None, help="write the eigenfunction as CSV")
    p_eig.set_defaults(func=cmd_eigen)

    p_cls = sub.add_parser(
        "classify", help="classify exponents into regimes", formatter_class=fmt
    )
    for name in ("--p", "--q", "--m", "--n"):
        p_cls.add_argument(name, type=float, required=True)
    p_cls.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
