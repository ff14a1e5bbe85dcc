"""Agreement between the compiled kernels and the pure-python reference."""
import os
import subprocess
import sys

import numpy as np
import pytest

from fastdiff import _kernels
from fastdiff._kernels import _pyref

speedups = pytest.importorskip(
    "fastdiff._kernels._speedups", reason="compiled extension not built"
)


def random_tridiag(rng, n):
    sub = rng.uniform(-1.0, 0.0, n - 1)
    sup = rng.uniform(-1.0, 0.0, n - 1)
    diag = 2.0 + rng.uniform(0.0, 1.0, n)  # diagonally dominant
    rhs = rng.standard_normal(n)
    return sub, diag, sup, rhs


@pytest.mark.parametrize("n", [1, 2, 5, 63, 255])
def test_thomas_matches_dense_solve(n):
    rng = np.random.default_rng(1234 + n)
    sub, diag, sup, rhs = random_tridiag(rng, n)
    a = np.diag(diag)
    if n > 1:
        a += np.diag(sub, -1) + np.diag(sup, 1)
    want = np.linalg.solve(a, rhs)
    got_py = _pyref.thomas_solve(sub, diag, sup, rhs)
    got_c = speedups.thomas_solve(sub, diag, sup, rhs)
    assert np.allclose(got_py, want, rtol=1e-12, atol=1e-12)
    assert np.allclose(got_c, want, rtol=1e-12, atol=1e-12)


def random_step_inputs(rng, n):
    u = rng.uniform(0.0, 1.0, n)
    v = rng.uniform(0.0, 1.0, n)
    src_u = rng.uniform(0.0, 1.0, n)
    src_v = rng.uniform(0.0, 1.0, n)
    return u, v, src_u, src_v


@pytest.mark.parametrize("mode_name", ["coupled", "none", "shifted", "frozen"])
@pytest.mark.parametrize("pq", [(1.5, 1.5), (1.2, 1.8)])
def test_pair_step_backends_agree(mode_name, pq):
    p, q = pq
    mode = _kernels.SOURCE_MODES[mode_name]
    rng = np.random.default_rng(7)
    n = 127
    u, v, src_u, src_v = random_step_inputs(rng, n)
    args = dict(
        bc_u=0.0, bc_v=0.0, p=p, q=q, m=0.75, n=1.25,
        dt=1e-3, h=1.0 / (n + 1), eps=1e-8, tol=1e-10, max_iter=60,
        source_mode=mode, src_u=src_u, src_v=src_v,
    )
    up, vp, it_p, r_p, neg_p = _pyref.pair_step(u, v, **args)
    uc, vc, it_c, r_c, neg_c = speedups.pair_step(u, v, **args)
    assert neg_p == neg_c == 0
    # Same sweep order; only libm-vs-numpy pow rounding separates the two,
    # which stays below 1e-12 even when the sweep count maxes out.
    assert np.allclose(up, uc, rtol=1e-10, atol=1e-11)
    assert np.allclose(vp, vc, rtol=1e-10, atol=1e-11)
    assert it_p == it_c


def test_pair_step_positive_boundary():
    rng = np.random.default_rng(11)
    n = 63
    u, v, src_u, src_v = random_step_inputs(rng, n)
    args = dict(
        bc_u=0.3, bc_v=0.1, p=1.5, q=1.5, m=1.0, n=1.0,
        dt=5e-4, h=1.0 / (n + 1), eps=1e-8, tol=1e-10, max_iter=60,
        source_mode=_kernels.SOURCE_COUPLED, src_u=src_u, src_v=src_v,
    )
    up, vp, *_ = _pyref.pair_step(u, v, **args)
    uc, vc, *_ = speedups.pair_step(u, v, **args)
    assert np.allclose(up, uc, rtol=1e-12, atol=1e-14)
    assert np.allclose(vp, vc, rtol=1e-12, atol=1e-14)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("FASTDIFF_PURE_PYTHON", None)
    if env_value is not None:
        env["FASTDIFF_PURE_PYTHON"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from fastdiff import _kernels; print(_kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    return out.stdout.strip()


def test_env_var_selects_python_backend():
    assert _backend_in_subprocess("1") == "python"


def test_default_prefers_compiled_backend():
    assert _backend_in_subprocess(None) == "compiled"


def test_env_var_zero_keeps_compiled_backend():
    assert _backend_in_subprocess("0") == "compiled"


def test_simulate_identical_across_backends(monkeypatch):
    from fastdiff import Field, Grid, SystemParams
    from fastdiff.parabolic import SolverConfig, simulate

    g = Grid(0.0, 1.0, 64)
    params = SystemParams(p=1.5, q=1.5, m=1.0, n=1.0)
    cfg = SolverConfig(dt=1e-3, t_max=0.05)
    u0 = Field.from_callable(g, lambda x: 0.5 * np.sin(np.pi * x))
    v0 = Field.from_callable(g, lambda x: 0.3 * np.sin(np.pi * x))

    traj_c = simulate(u0, v0, params, cfg)
    monkeypatch.setattr(_kernels, "pair_step", _pyref.pair_step)
    traj_p = simulate(u0, v0, params, cfg)

    assert np.allclose(traj_c.sup_u, traj_p.sup_u, rtol=1e-12, atol=1e-15)
    assert np.allclose(traj_c.sup_v, traj_p.sup_v, rtol=1e-12, atol=1e-15)
    assert np.array_equal(traj_c.picard_iters, traj_p.picard_iters)
    final_c = traj_c.final_state.u.interior_values
    final_p = traj_p.final_state.u.interior_values
    assert np.allclose(final_c, final_p, rtol=1e-12, atol=1e-15)
