"""Acceptance checks. Run with ``pytest tests/test_acceptance.py -s`` to see one verdict line per check."""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from affourier import systems
from affourier.decay import SweepPlan, decay_sweep
from affourier.fourier import chaos_sample, check_cs_bound, fourier_mc, fourier_recursive
from affourier.ifs import compose, make_system, op_norm, stopping_set
from affourier.renewal import (bump, constant, lattice_wave, renewal_Et, renewal_limit,
                               renewal_sweep, simulate_crossings)
from affourier.sphere import WalkLaw, guivarch_check, lyapunov, stationary
from affourier.transfer import CircleGrid, leading_modulus

ROOT = Path(__file__).resolve().parents[1]


def verdict(label, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    print(f"\n{'PASS' if ok else 'FAIL'}  {label}: {detail} [{elapsed:.1f} s / {limit} s]")
    return ok


@pytest.fixture(scope="module")
def proximal_law():
    return WalkLaw.from_system(systems.proximal_pair())


def strongly_contracting_systems():
    return [
        make_system([0.08 * systems.rotation(0.4), np.array([[0.1, 0.03], [-0.02, 0.05]])],
                    [[0.0, 0.0], [1.0, 0.5]], [0.3, 0.7]),
        make_system([0.1 * systems.rotation(1.0), np.diag([0.09, 0.02]), np.array([[0.04, 0.05], [0.0, 0.06]])],
                    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0.5, 0.25, 0.25]),
        make_system([0.1 * systems.proximal_triple_3d().linear[0] / 0.45, np.diag([0.1, 0.05, 0.03])],
                    [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]], [0.5, 0.5]),
    ]


def test_stopping_set_partition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_sum, bad_words, n_words = 0.0, 0, 0
    for s in strongly_contracting_systems():
        for _ in range(100):
            z = rng.normal(size=s.dim)
            z /= np.linalg.norm(z)
            t = rng.uniform(0, 20)
            st = stopping_set(s, z, t)
            worst_sum = max(worst_sum, abs(st.weights.sum() - 1))
            for i in range(len(st)):
                letters = st.letter_tuple(i)
                parent = compose(s, letters[:-1]).product
                full = parent @ s.linear[letters[-1]]
                crossed = -math.log(np.linalg.norm(full.T @ z)) > t
                before = -math.log(np.linalg.norm(parent.T @ z)) <= t
                bad_words += not (crossed and before)
                n_words += 1
    ok = worst_sum < 1e-10 and bad_words == 0
    assert verdict("stopping-set partition", ok,
                   f"max |sum p_w - 1| = {worst_sum:.2e}, crossing violations {bad_words}/{n_words}",
                   time.perf_counter() - t0, 20)


def test_estimator_cross_validation():
    t0 = time.perf_counter()
    s = systems.proximal_pair()
    pool = chaos_sample(s, 10**6, seed=11)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        u = rng.normal(size=2)
        xi = u / np.linalg.norm(u) * 100 * math.sqrt(rng.uniform())
        r = fourier_recursive(s, xi, tol=1e-4)
        m = fourier_mc(pool, xi)
        worst = max(worst, abs(r.value - m.value) / (3 * (r.error + m.error)))
    assert verdict("recursive vs Monte Carlo", worst <= 1,
                   f"max |diff| / 3(bound + stderr) = {worst:.3f} over 20 frequencies",
                   time.perf_counter() - t0, 60)


def test_self_affinity_identity():
    t0 = time.perf_counter()
    s = systems.proximal_pair()
    tol = 1e-5
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        xi = rng.uniform(-100, 100, size=2)
        lhs = fourier_recursive(s, xi, tol).value
        rhs = sum(p * np.exp(-2j * np.pi * xi @ b) * fourier_recursive(s, a.T @ xi, tol).value
                  for a, b, p in zip(s.linear, s.translation, s.weights))
        worst = max(worst, abs(lhs - rhs))
    assert verdict("self-affinity identity", worst <= 2 * tol,
                   f"max residual {worst:.2e} (limit {2 * tol:.0e}) over 50 frequencies",
                   time.perf_counter() - t0, 10)


def test_scalar_lyapunov():
    t0 = time.perf_counter()
    rho = 0.37
    est = lyapunov(WalkLaw.from_matrices([rho * np.eye(2)]), n_steps=1000, n_trajectories=20)
    err = abs(est.value - math.log(rho))
    assert verdict("scalar Lyapunov exactness", err < 1e-10 and est.half_width == 0,
                   f"|estimate - log rho| = {err:.1e}, half-width {est.half_width:.1e}",
                   time.perf_counter() - t0, 1)


def test_renewal_mass(proximal_law):
    t0 = time.perf_counter()
    grid = [0.0, 1.0, 5.0, 10.0, 20.0, 30.0]
    mean, se = simulate_crossings(proximal_law, [1.0, 0.0], grid, [lambda r: np.ones(len(r.u))], 10**5, 0)
    exact = bool(np.all(mean == 1.0) and np.all(se == 0.0))
    lim = renewal_limit(proximal_law, constant(1.0), x=[1.0, 0.0], n_samples=10**6, seed=1)
    z = abs(lim.value - 1) / lim.stderr
    assert verdict("renewal mass", exact and z <= 3,
                   f"E_t 1 exact on {len(grid)} thresholds: {exact}; limit {lim.value.real:.5f} "
                   f"+- {lim.stderr:.5f} ({z:.2f} sigma)", time.perf_counter() - t0, 60)


def test_renewal_convergence(proximal_law):
    t0 = time.perf_counter()
    f = bump(center=-0.4, width=0.5, direction=[1.0, 0.0], tilt=0.5)
    comp = renewal_sweep(proximal_law, f, [1.0, 0.0], [30.0], n_samples=10**6, seed=4, limit_samples=10**6)
    resid = float(comp.residual[-1])
    # common-ratio control: u(t) = t - (floor(t / log 2) + 1) log 2, and the limit of the wave is 0
    control = WalkLaw.from_matrices([0.5 * systems.rotation(1.0)])
    wave = lattice_wave(math.log(2))
    ts = np.arange(10.0, 30.01, 0.25)
    mean, _ = simulate_crossings(control, [1.0, 0.0], ts, [lambda r: wave(r.y, r.u)], 1000, 0)
    oracle = np.cos(2 * np.pi * (ts - (np.floor(ts / math.log(2)) + 1) * math.log(2)) / math.log(2))
    lim = renewal_limit(control, wave, x=[1.0, 0.0], n_samples=10**5, lyap=lyapunov(control, 200, 4))
    osc = float(np.max(np.abs(mean[:, 0] - lim.value)))
    matches = np.allclose(mean[:, 0].real, oracle, atol=1e-9)
    assert verdict("renewal convergence", resid < 0.05 and osc > 0.05 and matches,
                   f"proximal residual at t=30 {resid:.4f} (+- {comp.residual_stderr[-1]:.4f}); "
                   f"lattice control oscillation {osc:.3f}, overshoot oracle match {matches}",
                   time.perf_counter() - t0, 120)


def test_transfer_dichotomy(proximal_law):
    t0 = time.perf_counter()
    grid = CircleGrid(2048)
    laws = [WalkLaw.from_system(f()) for f in systems.CATALOG.values() if f().dim == 2]
    at_zero = max(abs(leading_modulus(law, 0.0, grid).value - 1) for law in laws)
    conformal = WalkLaw.from_system(systems.conformal_pair())
    bs = np.linspace(-50, 50, 41)
    flat = max(abs(leading_modulus(conformal, 1j * b, grid).value - 1) for b in bs)
    far = np.concatenate([-np.linspace(5, 50, 10), np.linspace(5, 50, 10)])
    gap = max(leading_modulus(proximal_law, 1j * b, grid).value for b in far)
    ok = at_zero <= 1e-8 and flat <= 1e-6 and gap < 0.99
    assert verdict("transfer dichotomy", ok,
                   f"|modulus(0) - 1| <= {at_zero:.1e} on {len(laws)} laws; conformal deviation {flat:.1e}; "
                   f"proximal max over 5 <= |b| <= 50 is {gap:.4f}", time.perf_counter() - t0, 120)


def test_decay_experiment():
    t0 = time.perf_counter()
    prox = decay_sweep(systems.proximal_pair(), SweepPlan.geometric(2, 4, 12))
    dirac = decay_sweep(systems.dirac(), SweepPlan.geometric(2, 4, 12))
    lattice = systems.lattice_control()
    base = abs(fourier_recursive(lattice, [1.0, 0.0], tol=1e-9).value)
    spread = max(abs(abs(fourier_recursive(lattice, [3.0**k, 0.0], tol=1e-9).value) - base) for k in range(9))
    digits = np.prod([abs(math.cos(2 * math.pi / 3**m)) for m in range(1, 60)])
    a, ci = prox.fit.alpha, prox.fit.ci
    ok = (prox.fit.reliable and a > 0.05 and ci[0] > 0 and dirac.alpha_hat is not None
          and abs(dirac.alpha_hat) <= 0.01 and spread <= 1e-6 and abs(base - digits) <= 1e-8)
    assert verdict("decay experiment", ok,
                   f"proximal alpha {a:.3f} CI ({ci[0]:.3f}, {ci[1]:.3f}); Dirac alpha {dirac.alpha_hat}; "
                   f"lattice spread {spread:.1e} around {base:.8f} (digit product {digits:.8f})",
                   time.perf_counter() - t0, 180)


def test_guivarch_regularity(proximal_law):
    t0 = time.perf_counter()
    nu = stationary(proximal_law, [1.0, 0.0], n_atoms=100_000, seed=0)
    g = guivarch_check(nu)
    monotone = bool(np.all(np.diff(g.sup_mass) <= 0))
    # diagonal maps keep the first axis: the measure started there sits on a hyperplane
    degenerate = stationary(WalkLaw.from_system(systems.diagonal_pair()), [1.0, 0.0], n_atoms=20_000, seed=0)
    d = guivarch_check(degenerate)
    ok = g.alpha > 0 and monotone and not g.flagged and d.flagged
    assert verdict("hyperplane regularity", ok,
                   f"proximal alpha {g.alpha:.3f}, monotone table {monotone}; degenerate control flagged "
                   f"{d.flagged} ({d.reason})", time.perf_counter() - t0, 60)


REPORT_CONFIG = {
    "preset": "proximal_pair",
    "seed": 7,
    "fourier": {"frequencies": [[3.0, 1.0], [10.0, -4.0]], "samples": 50000},
    "frostman": {"samples": 50000},
    "sweep": {"lo": 2, "hi": 6, "n_directions": 16, "tol": 1e-3},
    "walk": {"n_atoms": 10000, "lyapunov_steps": 500, "trajectories": 40},
    "renewal": {"t_grid": [2.0, 5.0, 10.0], "samples": 150000},
    "transfer": {"n_points": 512, "b_grid": [0.0, 5.0, 20.0], "n_iter": 200},
}


def run_report(cfg_path, out, threads):
    env = dict(os.environ, AFFOURIER_THREADS=str(threads))
    cmd = [sys.executable, "-m", "affourier.cli", "report", "--config", str(cfg_path), "--out", str(out)]
    return subprocess.run(cmd, env=env, capture_output=True, text=True, cwd=ROOT)


def test_report_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(REPORT_CONFIG))
    runs = [run_report(cfg, tmp_path / f"out{n}", n) for n in (1, 4)]
    codes = [r.returncode for r in runs]
    files = sorted(p.name for p in (tmp_path / "out1").iterdir())
    csvs = [f for f in files if f.endswith(".csv")]
    same = all((tmp_path / "out1" / f).read_bytes() == (tmp_path / "out4" / f).read_bytes() for f in files)
    ok = codes == [0, 0] and len(csvs) >= 4 and same
    assert verdict("report determinism", ok,
                   f"exit codes {codes}; {len(files)} files ({len(csvs)} CSV) identical across thread counts: {same}",
                   time.perf_counter() - t0, 60)


def test_cauchy_schwarz_bound():
    t0 = time.perf_counter()
    s = systems.proximal_pair()
    pool = chaos_sample(s, 2 * 10**5, seed=21)
    rng = np.random.default_rng(5)
    worst = -math.inf
    for _ in range(20):
        xi = rng.normal(size=2) * 20
        t = rng.uniform(0, 4)
        r = check_cs_bound(s, pool, xi, t, sigmas=4.0)
        worst = max(worst, (r.lhs - r.rhs) / r.diff_stderr if r.diff_stderr > 0 else 0.0)
    assert verdict("Cauchy-Schwarz bound", worst <= 4,
                   f"largest excess of lhs over rhs is {worst:.2f} combined sigma on 20 pairs",
                   time.perf_counter() - t0, 60)
