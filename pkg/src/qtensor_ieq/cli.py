"""Command-line entry point: ``qtensor-ieq {run,study,audit,selftest}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import driver
from .config import load_config
from .errors import ConfigParseError, ConfigValidationError, NonpositiveRadicand, NotConverged, ReferenceUnconverged


def build_parser():
    parser = argparse.ArgumentParser(prog="qtensor-ieq", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration with per-step diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides [output] dir)")

    p = sub.add_parser("study", help="temporal convergence study against a fine reference")
    p.add_argument("--config", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--no-gate", action="store_true", help="skip the reference self-consistency gate")

    p = sub.add_parser("audit", help="re-verify a run directory from its snapshots")
    p.add_argument("dir")

    sub.add_parser("selftest", help="invariant checks on built-in problems")
    return parser


def _print_lines(lines):
    for line in lines:
        print(line)
    return driver.EXIT_OK if all(l.ok for l in lines) else driver.EXIT_FAILED_CHECK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    limiter = driver.set_thread_limit()
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            return driver.run(cfg, args.out)
        if args.command == "study":
            if args.levels < 3:
                print("study needs --levels >= 3", file=sys.stderr)
                return driver.EXIT_CONFIG
            cfg = load_config(args.config)
            res = driver.study(cfg, args.levels, args.out, gate=not args.no_gate)
            for dt, e, o in zip(res.dts, res.err_final_l2, res.running_orders):
                print(f"dt={dt:.4g}  err_final_l2={e:.4e}  order={o:.3f}")
            print(f"fitted_order={res.fitted_order:.4f} fit_residual={res.fit_residual:.2e}")
            return driver.EXIT_OK
        if args.command == "audit":
            return _print_lines(driver.audit(args.dir))
        return _print_lines(driver.selftest())
    except (ConfigParseError, ConfigValidationError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return driver.EXIT_CONFIG
    except NonpositiveRadicand as exc:
        print(f"NonpositiveRadicand: {exc}", file=sys.stderr)
        return driver.EXIT_RADICAND
    except NotConverged as exc:
        print(f"NotConverged: {exc}", file=sys.stderr)
        return driver.EXIT_NOT_CONVERGED
    except ReferenceUnconverged as exc:
        print(f"ReferenceUnconverged: {exc}", file=sys.stderr)
        return driver.EXIT_REFERENCE
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
