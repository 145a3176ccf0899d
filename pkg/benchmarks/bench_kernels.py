"""Compare the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints the best
wall time per operation for each backend and the speed-up.
"""
import argparse
import time

import numpy as np

from jdbayes import kernels
from jdbayes.contrast import FilterSpec, classify_increments
from jdbayes.model import ParamVector, preset
from jdbayes.pipeline import estimate_full, jump_target, sigma_target
from jdbayes.sampler import MCMCConfig, run_chain
from jdbayes.simulator import SimConfig, simulate_path

THETA0 = ParamVector(2.0, 1.0, [1.2, 0.5])


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(model, path, mask):
    sig = sigma_target(model, path, 0.1, mask, [1.0])
    jmp = jump_target(model, path, 0.1, mask)
    cfg = MCMCConfig(seed=1)
    rank = FilterSpec("rank", n_jumps=100)
    return {
        "euler n=5000": lambda b: simulate_path(
            model, THETA0, SimConfig(5000, 0.1, 100.0, seed=2), backend=b),
        "log_target x1000 (sigma)": lambda b: [
            sig.kernel.evaluate([2.0], sig.box, backend=b)
            for _ in range(1000)],
        "chain 1e4 (sigma, d=1)": lambda b: run_chain(
            sig, cfg.replace(backend=b)),
        "chain 1e4 (alpha, d=2)": lambda b: run_chain(
            jmp, cfg.replace(backend=b)),
        "estimate_full n=1000": lambda b: estimate_full(
            path, model, 0.1, rank, cfg.replace(backend=b)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    model = preset("ou_ig")
    path = simulate_path(model, THETA0, SimConfig(1000, 0.1, 100.0, seed=1))
    mask = classify_increments(path, 0.1, FilterSpec("rank", n_jumps=100))
    backends = [b for b in ("cython", "python") if b in kernels.BACKENDS]
    if len(backends) == 1:
        print("compiled extension not built; timing the Python backend only")

    print(f"{'operation':<28}" + "".join(f"{b:>12}" for b in backends)
          + ("     speed-up" if len(backends) == 2 else ""))
    for name, fn in cases(model, path, mask).items():
        ts = [best_of(lambda: fn(b), args.repeat) for b in backends]
        line = f"{name:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in ts)
        if len(ts) == 2:
            line += f"{ts[1] / ts[0]:>12.1f}x"
        print(line)


if __name__ == "__main__":
    main()
