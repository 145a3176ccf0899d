"""Command line entry point: ``jdbayes run | validate | fisher``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .harness import ConfigError, assumption_report, load_config, \
    run_replications

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "assumptions.txt").write_text(assumption_report(cfg))

    def progress(i, total):
        if i % 50 == 0 or i == total:
            print(f"  {i}/{total} replications", file=sys.stderr)

    _, summary = run_replications(cfg, out, jobs=args.jobs,
                                  dump_paths=args.dump_paths,
                                  dump_chains=args.dump_chains,
                                  progress=None if args.quiet else progress)
    if not args.quiet:
        print(summary.to_text(), end="")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    text = assumption_report(cfg)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "assumptions.txt").write_text(text)
    return EXIT_OK


def _cmd_fisher(args) -> int:
    from .simulator import fisher_info

    cfg = load_config(args.config)
    fi = fisher_info(cfg.model, cfg.theta0, x0=cfg.x0,
                     time_quad_n=args.time_quad_n)
    with np.printoptions(precision=10, suppress=False):
        for name, block in fi.blocks().items():
            print(f"{name} =\n{block}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jdbayes",
        description="Adaptive Bayes estimation for small-noise "
                    "jump-diffusions")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the Monte Carlo replications")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--dump-paths", action="store_true")
    r.add_argument("--dump-chains", action="store_true")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="print the assumption report")
    v.add_argument("--config", required=True)
    v.add_argument("--out", help="also write assumptions.txt here")
    v.set_defaults(func=_cmd_validate)

    f = sub.add_parser("fisher", help="print the information blocks")
    f.add_argument("--config", required=True)
    f.add_argument("--time-quad-n", type=int, default=200)
    f.set_defaults(func=_cmd_fisher)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
