"""Command-line entry point.

    maxent-hierarchy hierarchy    --config cfg.json --out out/ [--nmax N] [--format csv|json]
    maxent-hierarchy distribution --config cfg.json --level N [--out out/]
    maxent-hierarchy fidelity     --config cfg.json [--out out/]
    maxent-hierarchy moments      --config cfg.json [--nmax N]

Exit status: 0 on success, 1 on usage or configuration errors, 2 on numerical
failure. Diagnostics go to stderr at the level given by MAXENT_LOG
(error, warn, info, debug; default warn).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from .bundle import (
    DISTRIBUTION_COLUMNS,
    HIERARCHY_COLUMNS,
    _distribution_rows,
    _fidelity_columns,
    _fidelity_rows,
    _hierarchy_rows,
    format_float,
    load_config,
    render_table,
    write_report,
)
from .ensembles import diagonal_ensemble, moments_operator, moments_spectral, neel_state
from .basis import Basis
from .errors import NumericalError
from .hierarchy import run_hierarchy
from .spin_chain import build_hamiltonian, diagonalize

logger = logging.getLogger("maxent_hierarchy")

DEFAULT_TIME_GRID = np.linspace(0.0, 10.0, 101)
_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (JSON)")
    common.add_argument("--out", help="output directory; tables go to stdout when omitted")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--nmax", type=int, help="override n_max from the config")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    parser = _Parser(prog="maxent-hierarchy", description="Maximum-entropy ensemble hierarchy for spin chains.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("hierarchy", parents=[common], help="full sweep gamma_0..gamma_nmax")
    dist = sub.add_parser("distribution", parents=[common], help="one-level snapshot of p_DE vs gamma_n")
    dist.add_argument("--level", type=int, required=True)
    sub.add_parser("fidelity", parents=[common], help="F(t) of the diagonal ensemble and snapshot levels")
    sub.add_parser("moments", parents=[common], help="energy moments by both routes")
    return parser


def _configure_logging(quiet):
    level = _LOG_LEVELS.get(os.environ.get("MAXENT_LOG", "warn").strip().lower(), logging.WARNING)
    if quiet:
        level = max(level, logging.ERROR)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def _load(args):
    if not os.path.exists(args.config):
        raise UsageError(f"config file not found: {args.config}")
    try:
        cfg = load_config(args.config)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config} is not valid JSON: {exc}") from exc
    except jsonschema.ValidationError as exc:
        raise UsageError(f"{args.config}: {exc.message}") from exc
    if args.nmax is not None:
        cfg = dataclasses.replace(cfg, n_max=args.nmax, snapshot_levels=[k for k in cfg.snapshot_levels if k <= args.nmax])
    return cfg


def _emit(args, name, columns, rows):
    text = render_table(columns, rows, args.format)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{name}.{args.format}")
        with open(path, "w", newline="") as fh:
            fh.write(text)
        if not args.quiet:
            print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def _cmd_hierarchy(args):
    cfg = _load(args)
    report = run_hierarchy(cfg)
    if args.out:
        bundle = write_report(report, args.out, args.format)
        if not args.quiet:
            print(f"wrote {len(bundle.files)} files to {bundle.directory}")
    else:
        sys.stdout.write(render_table(HIERARCHY_COLUMNS, _hierarchy_rows(report), args.format))
    return 0


def _cmd_distribution(args):
    cfg = _load(args)
    cfg = dataclasses.replace(cfg, n_max=args.level, snapshot_levels=[args.level], time_grid=None)
    report = run_hierarchy(cfg)
    _emit(args, f"distribution_{args.level}", DISTRIBUTION_COLUMNS, _distribution_rows(report.snapshots[args.level]))
    return 0


def _cmd_fidelity(args):
    cfg = _load(args)
    if cfg.time_grid is None:
        cfg = dataclasses.replace(cfg, time_grid=DEFAULT_TIME_GRID)
    report = run_hierarchy(cfg)
    _emit(args, "fidelity", _fidelity_columns(report.fidelity), _fidelity_rows(report.fidelity))
    return 0


def _cmd_moments(args):
    cfg = _load(args)
    n_max = args.nmax if args.nmax is not None else max(cfg.n_max, 1)
    H = build_hamiltonian(cfg.chain)
    psi0 = neel_state(cfg.chain.L, cfg.initial_state[-1])
    de = diagonal_ensemble(diagonalize(H), psi0)
    spectral = moments_spectral(de, n_max, Basis.MONOMIAL_RAW)
    operator = moments_operator(H, psi0, n_max, rescale=de.rescale)
    rows = []
    for k in range(n_max):
        a, b = spectral.values[k], operator.values[k]
        rows.append([k + 1, a, b, abs(a - b) / max(1.0, abs(a))])
    columns = ("k", "mu_spectral", "mu_operator", "rel_diff")
    if args.out:
        _emit(args, "moments", columns, rows)
    else:
        for row in rows:
            print(f"{row[0]} {format_float(row[1])} {format_float(row[2])} {format_float(row[3])}")
    return 0


_COMMANDS = {
    "hierarchy": _cmd_hierarchy,
    "distribution": _cmd_distribution,
    "fidelity": _cmd_fidelity,
    "moments": _cmd_moments,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.quiet)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"maxent-hierarchy: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"maxent-hierarchy: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"maxent-hierarchy: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"maxent-hierarchy: {exc}", file=sys.stderr)
        return 1
