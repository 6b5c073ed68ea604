"""Command line entry point: ``symmbem --preset table1`` etc."""

from __future__ import annotations

import argparse
import sys
import time

from .experiments import (PRESETS, ConfigError, build_config, parse_config_text,
                          run_experiment, verify, write_outputs)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="symmbem",
        description="Galerkin BEM for Symm's equation on the L-shaped domain: "
                    "local convergence tables and K-operator post-processing.")
    p.add_argument("--preset", choices=PRESETS, help="experiment preset (default table1)")
    p.add_argument("--config", metavar="FILE", help="flat key = value config file")
    p.add_argument("--max-n", type=int, metavar="N", help="drop mesh sizes above N")
    p.add_argument("--jobs", type=int, metavar="J", help="worker processes")
    p.add_argument("--out", metavar="PREFIX", help="output file prefix (default: preset name)")
    p.add_argument("--grading-exponent", metavar="B[,B...]", help="grading exponent(s)")
    p.add_argument("--kernel", metavar="L,Q", help="K-operator order, or 'none'")
    p.add_argument("--trim", metavar="A[,A...]", help="corner trims a (unscaled units)")
    p.add_argument("--mesh", choices=("uniform", "graded", "combined"))
    p.add_argument("--dump-solution", action="store_true",
                   help="also write plain-text polygon and solution dumps")
    p.add_argument("--verify", action="store_true", help="run the self-checks and exit")
    p.add_argument("--tighten", type=float, default=1.0, metavar="F",
                   help="divide every --verify threshold by F")
    return p


def _config_from_args(args) -> "ExperimentConfig":  # noqa: F821
    raw = {}
    source = "<command line>"
    if args.config:
        source = args.config
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        raw = parse_config_text(text, source)
    overrides = {"preset": args.preset, "max_n": args.max_n, "jobs": args.jobs,
                 "out": args.out, "grading_exponent": args.grading_exponent,
                 "kernel": args.kernel, "trims": args.trim, "mesh": args.mesh}
    for key, value in overrides.items():
        if value is not None:
            if key == "trims":
                raw.pop("trim", None)
            raw[key] = (str(value), 0)
    if args.dump_solution:
        raw["dump_solution"] = ("true", 0)
    return build_config(raw, source)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verify:
        if args.tighten <= 0:
            print("error: --tighten must be positive", file=sys.stderr)
            return 2
        checks = verify(args.tighten)
        for c in checks:
            print(c.line())
        failed = sum(not c.passed for c in checks)
        print(f"{len(checks) - failed}/{len(checks)} checks passed")
        return 1 if failed else 0
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        result = run_experiment(cfg)
    except Exception as exc:  # report cleanly, nothing has been written yet
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    files = write_outputs(cfg, result)
    print(result.markdown)
    print(f"wrote {', '.join(files)} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
