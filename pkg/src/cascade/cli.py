"""Command line entry point.

Usage::

    cascade derive-params|fig2|fig3|fig4|error-budget|custom --config FILE [--out DIR] [--reduced] [--fixed-step]

Exit codes: 0 success, 2 configuration error, 3 numerical failure (1 for
file-system errors while writing outputs).  Sweep
parallelism is set with the ``CASCADE_THREADS`` environment variable
(default 1).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import COMMANDS, load_config
from .errors import CascadeError, ConfigError

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cascade", description="Four-photon cat stabilisation scenarios.")
    p.add_argument("command", choices=list(COMMANDS), help="scenario to run")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--reduced", action="store_true", help="short CI-sized window for the expensive full models")
    p.add_argument("--fixed-step", action="store_true", help="fixed-step RK4 for bitwise reproducible output")
    p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, COMMANDS[args.command])
        from .integrator import thread_count
        thread_count()
    except (ConfigError, ValueError) as exc:
        print(f"cascade: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from .scenarios import run
    try:
        report = run(cfg, args.out, fixed_step=args.fixed_step, reduced=args.reduced, plots=not args.no_plots)
    except ConfigError as exc:
        print(f"cascade: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CascadeError, ArithmeticError, FloatingPointError) as exc:
        print(f"cascade: numerical failure in {cfg.scenario}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"cascade: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    out = args.out or cfg.output.directory
    print(f"{cfg.scenario}: wrote {len(report.files) + 3} files to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
