"""Config parsing and CSV/JSON output bundles.

Column names and order are part of the public contract:

* ``hierarchy.csv``        n,entropy_nats,dkl_nats,trace_distance,pinsker_bound,converged,iters
* ``distribution_<n>.csv`` index,energy,p_de,p_gamma
* ``fidelity.csv``         t,f_de,f_gamma_<n>...
* ``manifest.json``        config echo + sha256, library version, affine energy map, telemetry

With ``format="json"`` each table is written as a list of row objects with the
same keys. Floats are written with 17 significant digits so they read back
bit for bit. Energies are in rescaled units (see the manifest's ``rescale``).
"""

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .basis import Rescale
from .hierarchy import ExperimentConfig, FidelityTable, HierarchyReport, LevelTelemetry, Snapshot
from .maxent import SolverOptions
from .metrics import ConvergenceRecord
from .spin_chain import MAX_SITES, SpinChainParams

HIERARCHY_COLUMNS = ("n", "entropy_nats", "dkl_nats", "trace_distance", "pinsker_bound", "converged", "iters")
DISTRIBUTION_COLUMNS = ("index", "energy", "p_de", "p_gamma")
FORMATS = ("csv", "json")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["chain", "initial_state", "n_max", "snapshot_levels"],
    "properties": {
        "chain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L", "g", "h", "J"],
            "properties": {
                "L": {"type": "integer", "minimum": 2, "maximum": MAX_SITES},
                "g": {"type": "number"},
                "h": {"type": "number"},
                "J": {"type": "number"},
                "boundary_axis": {"enum": ["z"]},
            },
        },
        "initial_state": {"enum": ["neel_z", "neel_x"]},
        "n_max": {"type": "integer", "minimum": 0},
        "snapshot_levels": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grad_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_newton_iters": {"type": "integer", "minimum": 1},
                "damping_growth": {"type": "number", "exclusiveMinimum": 1},
                "armijo": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "basis": {"enum": ["monomial_raw", "monomial_rescaled", "chebyshev_rescaled"]},
                "theta_bound": {"type": "number", "exclusiveMinimum": 0},
                "refine_steps": {"type": "integer", "minimum": 0},
                "entropy_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "time_grid": {"type": "array", "items": {"type": "number"}},
    },
}


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def config_from_dict(data):
    jsonschema.validate(data, CONFIG_SCHEMA)
    chain = data["chain"]
    return ExperimentConfig(
        chain=SpinChainParams(
            L=chain["L"],
            g=float(chain["g"]),
            h=float(chain["h"]),
            J=float(chain["J"]),
            boundary_axis=chain.get("boundary_axis", "z"),
        ),
        initial_state=data["initial_state"],
        n_max=data["n_max"],
        snapshot_levels=tuple(data["snapshot_levels"]),
        solver=SolverOptions(**data.get("solver", {})),
        time_grid=None if data.get("time_grid") is None else np.asarray(data["time_grid"], dtype=float),
    )


def config_to_dict(cfg):
    c = cfg.chain
    out = {
        "chain": {"L": c.L, "g": c.g, "h": c.h, "J": c.J, "boundary_axis": c.boundary_axis},
        "initial_state": cfg.initial_state,
        "n_max": cfg.n_max,
        "snapshot_levels": list(cfg.snapshot_levels),
        "solver": cfg.solver.to_dict(),
    }
    if cfg.time_grid is not None:
        out["time_grid"] = [float(t) for t in cfg.time_grid]
    return out


def load_config(path):
    with open(path) as fh:
        data = json.load(fh)
    return config_from_dict(data)


def config_hash(config_dict):
    return hashlib.sha256(dumps_json(config_dict, indent=None, sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def dumps_json(obj, indent=2, sort_keys=False, _level=0):
    """json.dumps with floats fixed at 17 significant digits."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ","
    colon = ":" if indent is None else ": "
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k))}{colon}{dumps_json(v, indent, sort_keys, _level + 1)}"
            for k, v in (sorted(obj.items()) if sort_keys else obj.items())
        ]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # rows of scalars stay on one line
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps_json(v, None) for v in obj) + "]"
        return "[" + sep.join(f"{pad}{dumps_json(v, indent, sort_keys, _level + 1)}" for v in obj) + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _cell(obj)


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def _hierarchy_rows(report):
    for rec, tel in zip(report.records, report.telemetry):
        yield [rec.level, rec.entropy, rec.relative_entropy, rec.trace_distance, rec.pinsker_bound,
               bool(tel.converged), tel.iterations]


def _distribution_rows(snap):
    for i in range(len(snap.p_de)):
        yield [i, snap.energies[i], snap.p_de[i], snap.q_gamma[i]]


def _fidelity_columns(table):
    return ("t", "f_de") + tuple(f"f_gamma_{n}" for n in sorted(table.f_gamma))


def _fidelity_rows(table):
    levels = sorted(table.f_gamma)
    for i, t in enumerate(table.times):
        yield [t, table.f_de[i]] + [table.f_gamma[n][i] for n in levels]


def render_table(columns, rows, fmt):
    rows = list(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        return dumps_json([dict(zip(columns, row)) for row in rows]) + "\n"
    raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def _parse_table(text, fmt):
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        columns = next(reader)
        return columns, [dict(zip(columns, row)) for row in reader]
    rows = json.loads(text)
    columns = list(rows[0].keys()) if rows else []
    return columns, rows


def _num(v):
    return float(v)


def _flag(v):
    return v is True or v == "true"


@dataclass
class OutputBundle:
    directory: Path
    manifest: dict
    files: list


def _write(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc.strerror or exc}") from exc


def write_report(report, directory, fmt="csv"):
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"could not create output directory {directory}: {exc.strerror or exc}") from exc

    files = []
    name = f"hierarchy.{fmt}"
    _write(directory / name, render_table(HIERARCHY_COLUMNS, _hierarchy_rows(report), fmt))
    files.append(name)
    for n in sorted(report.snapshots):
        name = f"distribution_{n}.{fmt}"
        _write(directory / name, render_table(DISTRIBUTION_COLUMNS, _distribution_rows(report.snapshots[n]), fmt))
        files.append(name)
    if report.fidelity is not None:
        name = f"fidelity.{fmt}"
        _write(directory / name, render_table(_fidelity_columns(report.fidelity), _fidelity_rows(report.fidelity), fmt))
        files.append(name)

    cfg = config_to_dict(report.config)
    manifest = {
        "library": "maxent_hierarchy",
        "version": __version__,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "dimension": report.dimension,
        "rescale": report.rescale.to_dict(),
        "units": {"energy": "rescaled", "entropy": "nats", "time": "inverse rescaled energy"},
        "entropy_de": report.entropy_de,
        "format": fmt,
        "files": files,
        "telemetry": [
            {
                "level": t.level,
                "converged": t.converged,
                "iterations": t.iterations,
                "damping_events": t.damping_events,
                "residual": t.residual,
                "error": t.error,
            }
            for t in report.telemetry
        ],
    }
    _write(directory / "manifest.json", dumps_json(manifest) + "\n")
    return OutputBundle(directory=directory, manifest=manifest, files=files + ["manifest.json"])


def read_report(directory):
    """Rebuild a HierarchyReport from a bundle written by :func:`write_report`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    fmt = manifest["format"]
    cfg = config_from_dict(manifest["config"])

    _, rows = _parse_table((directory / f"hierarchy.{fmt}").read_text(), fmt)
    records = [
        ConvergenceRecord(
            level=int(r["n"]),
            entropy=_num(r["entropy_nats"]),
            relative_entropy=_num(r["dkl_nats"]),
            trace_distance=_num(r["trace_distance"]),
            pinsker_bound=_num(r["pinsker_bound"]),
        )
        for r in rows
    ]
    telemetry = [
        LevelTelemetry(
            level=t["level"],
            converged=t["converged"],
            iterations=t["iterations"],
            damping_events=t["damping_events"],
            residual=_num(t["residual"]),
            error=t["error"],
        )
        for t in manifest["telemetry"]
    ]

    snapshots = {}
    for n in cfg.snapshot_levels:
        _, rows = _parse_table((directory / f"distribution_{n}.{fmt}").read_text(), fmt)
        snapshots[n] = Snapshot(
            level=n,
            energies=np.array([_num(r["energy"]) for r in rows]),
            p_de=np.array([_num(r["p_de"]) for r in rows]),
            q_gamma=np.array([_num(r["p_gamma"]) for r in rows]),
        )

    fidelity = None
    path = directory / f"fidelity.{fmt}"
    if path.exists():
        columns, rows = _parse_table(path.read_text(), fmt)
        levels = [int(c[len("f_gamma_"):]) for c in columns if c.startswith("f_gamma_")]
        fidelity = FidelityTable(
            times=np.array([_num(r["t"]) for r in rows]),
            f_de=np.array([_num(r["f_de"]) for r in rows]),
            f_gamma={n: np.array([_num(r[f"f_gamma_{n}"]) for r in rows]) for n in levels},
        )

    return HierarchyReport(
        config=cfg,
        dimension=manifest["dimension"],
        rescale=Rescale(**manifest["rescale"]),
        entropy_de=_num(manifest["entropy_de"]),
        records=records,
        telemetry=telemetry,
        snapshots=snapshots,
        fidelity=fidelity,
    )


def bundle_is_consistent(directory):
    """Check manifest hash and row counts of a written bundle."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if config_hash(manifest["config"]) != manifest["config_sha256"]:
        return False
    fmt = manifest["format"]
    D = manifest["dimension"]
    n_rows = manifest["config"]["n_max"] + 1
    for name in manifest["files"]:
        _, rows = _parse_table((directory / name).read_text(), fmt)
        expected = n_rows if name.startswith("hierarchy") else D if name.startswith("distribution") else len(rows)
        if len(rows) != expected:
            return False
    return os.path.exists(directory / "manifest.json")
