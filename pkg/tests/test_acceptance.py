"""End-to-end acceptance checks; one pass/fail line per criterion is
printed in the terminal summary."""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from jdbayes.contrast import FilterSpec, classify_increments, contrast2, \
    ideal_contrasts
from jdbayes.harness import parse_config, run_replications
from jdbayes.model import FAMILIES, ParamBox, dpsi_dalpha, make_model, preset, \
    psi
from jdbayes.sampler import MCMCConfig, grid_posterior_mean, run_chain
from jdbayes.simulator import SimConfig, fisher_info, simulate_path

from conftest import THETA0, gaussian_target, record, validation_targets

TABLE_CELLS = [(1000, 0.1), (2000, 0.1), (1000, 0.01)]
R = 200


def table_doc(cells=TABLE_CELLS, reps=R, seed=20240101):
    return {
        "model": "ou_ig",
        "theta0": {"sigma": [2.0], "mu": [1.0], "alpha": [1.2, 0.5]},
        "boxes": {"sigma": [0.01, 50], "mu": [0.01, 50], "alpha": [0.01, 50]},
        "lambda": 100, "x0": 1.0,
        "cells": [{"n": n, "epsilon": e} for n, e in cells],
        "replications": reps, "seed": seed,
        "filter": {"kind": "rank", "n_jumps": 100},
        "mcmc": {"rho": 0.8, "chain_len": 10000, "burn_in": 525},
    }


@pytest.fixture(scope="session")
def table():
    t0 = time.perf_counter()
    _, summary = run_replications(parse_config(table_doc()))
    return summary, time.perf_counter() - t0


def test_c01_sampler_matches_grid_oracle():
    t0 = time.perf_counter()
    worst, fails = 0.0, []
    for name, target in validation_targets():
        box = target.box
        if name == "contrast0_n500":
            box = ParamBox([0.5], [1.5])
        elif name.startswith("gauss2d"):
            box = ParamBox([0.01, 0.01], [6.0, 10.0])
        ref = grid_posterior_mean(target, box,
                                  801 if target.dim == 2 else 20001)
        for seed in range(3):
            ch = run_chain(target, MCMCConfig(chain_len=20_000, seed=seed))
            z = np.max(np.abs(ch.posterior_mean - ref) / ch.mc_se)
            worst = max(worst, z)
            if z > 3:
                fails.append(f"{name}/seed{seed}")
    dt = time.perf_counter() - t0
    ok = not fails and dt < 120
    record(1, ok, f"max |chain - grid| / mc_se = {worst:.2f} over 6 targets x "
                  f"3 seeds (<= 3); {dt:.1f} s (< 120 s)"
                  + (f"; failing {fails}" if fails else ""))
    assert ok


def test_c02_initial_estimator_table_cell(table):
    summary, dt = table
    r = summary.get("mu0_hat", 1000, 0.1)
    ok = 0.99 <= r.mean <= 1.02 and 0.018 <= r.sd <= 0.072 and r.count == R
    record(2, ok, f"mean {r.mean:.5f} in [0.99, 1.02], sd {r.sd:.5f} in "
                  f"[0.018, 0.072], R={r.count}; 3 cells in {dt:.0f} s")
    assert ok


def test_c03_diffusion_estimator_table_cell(table):
    r = table[0].get("sigma_hat", 2000, 0.1)
    ok = 1.85 <= r.mean <= 2.15 and r.count == R
    record(3, ok, f"mean sigma_hat {r.mean:.5f} in [1.85, 2.15], R={r.count}")
    assert ok


def test_c04_small_noise_trend(table):
    lo = table[0].get("mu_hat", 1000, 0.01).sd
    hi = table[0].get("mu_hat", 1000, 0.1).sd
    ok = lo < hi
    record(4, ok, f"sd(mu_hat) eps=0.01: {lo:.5f} < eps=0.1: {hi:.5f}")
    assert ok


def test_c05_jump_confounding_grows(table):
    small = abs(table[0].get("alpha1_hat", 1000, 0.01).mean - 1.2)
    large = abs(table[0].get("alpha1_hat", 1000, 0.1).mean - 1.2)
    ok = small > large
    record(5, ok, f"|mean(alpha1_hat) - 1.2| eps=0.01: {small:.4f} > "
                  f"eps=0.1: {large:.4f}")
    assert ok


def test_c06_fisher_closed_forms(ou_ig):
    t0 = time.perf_counter()
    fi = fisher_info(ou_ig, THETA0)
    dt = time.perf_counter() - t0
    e0 = abs(fi.I0[0, 0] - (1 - math.exp(-2)) / 2)
    e2 = abs(fi.I2[0, 0] - 0.5)
    ok = e0 < 1e-8 and e2 < 1e-10 and dt < 1.0
    record(6, ok, f"|I0 - (1-e^-2)/2| = {e0:.1e} (< 1e-8), |I2 - 0.5| = "
                  f"{e2:.1e} (< 1e-10); {dt:.2f} s (< 1 s)")
    assert ok


def test_c07_rank_filter_recall_precision(ou_ig):
    t0 = time.perf_counter()
    rec, prec = [], []
    for seed in range(20):
        p = simulate_path(ou_ig, THETA0, SimConfig(1000, 0.1, 100.0, seed=seed))
        single = p.truth.counts == 1
        m = classify_increments(p, 0.1, FilterSpec("rank", n_jumps=100))
        hit = np.sum(m.jump & single)
        rec.append(hit / single.sum())
        prec.append(hit / m.jump.sum())
    dt = time.perf_counter() - t0
    r, pr = float(np.mean(rec)), float(np.mean(prec))
    ok = r >= 0.90 and pr >= 0.90 and dt < 60
    record(7, ok, f"recall {r:.4f}, precision {pr:.4f} (both >= 0.90) over "
                  f"20 paths; {dt:.1f} s")
    assert ok


def test_c08_ideal_contrast_convergence(ou_ig):
    t0 = time.perf_counter()
    grid = [(a1, a2) for a1 in np.linspace(0.5, 2.5, 5)
            for a2 in np.linspace(0.2, 1.0, 5)]
    meds = []
    for n in (500, 1000, 2000, 4000):
        sups = []
        for seed in range(20):
            p = simulate_path(ou_ig, THETA0, SimConfig(n, 0.01, 100.0,
                                                        seed=seed))
            m = classify_increments(p, 0.01, FilterSpec("rank", n_jumps=100))
            sups.append(max(
                abs(contrast2(ou_ig, p, a, 0.01, m)
                    - ideal_contrasts(ou_ig, p, THETA0.replace(alpha=a),
                                      0.01)[2])
                for a in grid))
        meds.append(float(np.median(sups)))
    dt = time.perf_counter() - t0
    ok = all(b <= a for a, b in zip(meds, meds[1:])) and dt < 300
    record(8, ok, "median sup-gap at n=500/1000/2000/4000: "
                  + ", ".join(f"{v:.3f}" for v in meds) + f"; {dt:.1f} s")
    assert ok


def test_c09_normalization_gradients_shift():
    t0 = time.perf_counter()
    probes = {"normal": [(0.0, 1.0), (1.2, 0.5), (-2.0, 3.0), (0.5, 0.1),
                         (3.0, 7.0)],
              "gamma": [(1.0, 2.0), (1.2, 0.5), (0.3, 4.0), (2.0, 1.0),
                        (5.0, 1.5)],
              "inverse_gaussian": [(1.2, 0.5), (1.0, 1.0), (0.5, 3.0),
                                   (2.0, 0.8), (3.0, 10.0)]}
    mass_err, grad_err = 0.0, 0.0
    rng = np.random.default_rng(2024)
    for fam, alphas in probes.items():
        f = FAMILIES[fam]()
        for a in alphas:
            mass_err = max(mass_err, abs(f.total_mass(np.array(a)) - 1.0))
        box = ParamBox([-10.0, 0.01], [50.0, 50.0])
        m = make_model("ou", fam, alpha_box=box)
        for _ in range(20):
            a = np.array([rng.uniform(0.3, 3.0), rng.uniform(0.3, 5.0)])
            y = rng.uniform(0.2, 4.0)
            g = dpsi_dalpha(m, 0.0, y, a)
            fd = np.empty(2)
            for i in range(2):
                e = np.zeros(2)
                e[i] = 1e-6 * max(1.0, a[i])
                fd[i] = (psi(m, 0.0, y, a + e) - psi(m, 0.0, y, a - e)) \
                    / (2 * e[i])
            grad_err = max(grad_err, float(np.max(
                np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3))))
    t = gaussian_target(0.3, 0.01, ParamBox.uniform(0.01, 50, 1))
    cfg = MCMCConfig(chain_len=10_000, seed=3)
    a, b = run_chain(t, cfg), run_chain(t.shifted(-6000.0), cfg)
    same = bool(np.array_equal(a.trace, b.trace)) and \
        bool(np.all(b.log_target <= -6000))
    dt = time.perf_counter() - t0
    ok = mass_err < 1e-6 and grad_err < 1e-5 and same and dt < 60
    record(9, ok, f"max mass error {mass_err:.1e} (< 1e-6), max gradient "
                  f"rel error {grad_err:.1e} (< 1e-5), shift -6000 identical "
                  f"chain: {same}; {dt:.1f} s")
    assert ok


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "jdbayes.cli", *args],
                          capture_output=True, text=True)


def test_c10_cli_determinism(tmp_path):
    doc = table_doc(cells=[(500, 0.1), (500, 0.01)], reps=8, seed=7)
    doc["mcmc"]["chain_len"] = 3000
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(doc))
    outs = {}
    for tag, extra in (("a", []), ("b", []), ("p", ["--jobs", "4"])):
        res = _cli("run", "--config", str(cfg), "--out", str(tmp_path / tag),
                   "--quiet", *extra)
        assert res.returncode == 0, res.stderr
        outs[tag] = (tmp_path / tag / "results.csv").read_bytes()
    rerun = outs["a"] == outs["b"]
    head, *rows = outs["p"].decode().splitlines()
    serial_head, *serial_rows = outs["a"].decode().splitlines()
    key = lambda r: tuple(int(v) for v in r.split(",")[:1] + r.split(",")[4:5])
    parallel = head == serial_head and \
        sorted(rows, key=key) == sorted(serial_rows, key=key)
    ok = rerun and parallel
    record(10, ok, f"re-run byte-identical: {rerun}; --jobs 4 equals serial "
                   f"after sort: {parallel}")
    assert ok
