"""``ntklab`` command-line entry point.

Exit codes: 0 on a passing or neutral run, 1 when an acceptance-style run
fails, 2 on any error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from ..exceptions import NtkLabError
from .config import DEFAULTS, resolve
from .experiments import run


@contextmanager
def output_lock(out):
    """Hold ``out/.lock`` exclusively for the duration of a run."""
    path = Path(out) / ".lock"
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise NtkLabError(f"{out} is locked by another run (remove {path} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="ntklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in DEFAULTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with parameter values")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override one parameter; VALUE is parsed as JSON when possible")
    return parser


def execute(argv=None):
    """Run one subcommand; returns ``(exit_code, report_or_None)``."""
    args = build_parser().parse_args(argv)
    cfg = resolve(args.subcommand, args.config, args.override, args.seed, args.out)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with output_lock(out):
        manifest = {"config": cfg.resolved(), "output_dir": str(out), "hash": cfg.content_hash()}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        report = run(cfg, out)
        report.artifacts = [str(out / "manifest.json"), str(out / "report.json")] + report.artifacts
        (out / "report.json").write_text(report.to_json())
    return (1 if report.passed is False else 0), report


def main(argv=None):
    try:
        code, report = execute(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors and 0 for --help
        return exc.code if isinstance(exc.code, int) else 2
    except (NtkLabError, ValueError, OSError) as exc:
        print(f"ntklab: error: {exc}", file=sys.stderr)
        return 2
    verdict = {True: "PASS", False: "FAIL", None: "N/A"}[report.passed]
    print(f"{report.subcommand}: {verdict}")
    for key, value in report.metrics.items():
        if not isinstance(value, dict):
            print(f"  {key} = {value}")
    return code


if __name__ == "__main__":
    sys.exit(main())
