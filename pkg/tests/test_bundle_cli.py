import csv
import filecmp
import io
import json

import numpy as np
import pytest
from jsonschema import ValidationError

from maxent_hierarchy import __version__
from maxent_hierarchy.bundle import (
    DISTRIBUTION_COLUMNS,
    HIERARCHY_COLUMNS,
    bundle_is_consistent,
    config_from_dict,
    config_hash,
    config_to_dict,
    dumps_json,
    format_float,
    read_report,
    write_report,
)
from maxent_hierarchy.cli import main
from maxent_hierarchy.hierarchy import run_hierarchy

L4 = {
    "chain": {"L": 4, "g": 0.9, "h": 0.75, "J": 1.0},
    "initial_state": "neel_z",
    "n_max": 15,
    "snapshot_levels": [1, 15],
}


@pytest.fixture
def l4_config(tmp_path):
    path = tmp_path / "L4.json"
    path.write_text(json.dumps(L4))
    return path


def test_schema_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        config_from_dict({**L4, "colour": "red"})
    with pytest.raises(ValidationError):
        config_from_dict({**L4, "chain": {**L4["chain"], "K": 1}})
    with pytest.raises(ValidationError):
        config_from_dict({k: v for k, v in L4.items() if k != "n_max"})
    with pytest.raises(ValidationError):
        config_from_dict({**L4, "initial_state": "neel_y"})


def test_config_round_trip():
    cfg = config_from_dict({**L4, "solver": {"grad_tol": 1e-11}, "time_grid": [0, 1.5]})
    again = config_from_dict(config_to_dict(cfg))
    assert config_to_dict(again) == config_to_dict(cfg)
    assert again.solver.grad_tol == 1e-11


def test_hash_is_key_order_independent():
    d = config_to_dict(config_from_dict(L4))
    shuffled = dict(reversed(list(d.items())))
    assert config_hash(d) == config_hash(shuffled)


def test_float_format_round_trips(rng):
    for x in rng.normal(size=100) * 10.0 ** rng.integers(-300, 300, size=100):
        assert float(format_float(x)) == x
    assert format_float(float("nan")) == "NaN"


def test_dumps_json_is_valid():
    text = dumps_json({"b": [1.0, 2.5], "a": {"x": None, "y": True}})
    assert json.loads(text) == {"b": [1.0, 2.5], "a": {"x": None, "y": True}}
    assert text.index('"b"') < text.index('"a"')


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_write_read_round_trip(tmp_path, l4_report, fmt):
    bundle = write_report(l4_report, tmp_path / fmt, fmt)
    assert bundle_is_consistent(bundle.directory)
    assert read_report(bundle.directory) == l4_report
    m = bundle.manifest
    assert m["version"] == __version__ and m["config_sha256"] == config_hash(m["config"])


def test_golden_columns(tmp_path, l4_report):
    write_report(l4_report, tmp_path, "csv")
    header = (tmp_path / "hierarchy.csv").read_text().splitlines()[0]
    assert header == "n,entropy_nats,dkl_nats,trace_distance,pinsker_bound,converged,iters"
    assert tuple(header.split(",")) == HIERARCHY_COLUMNS
    dist = (tmp_path / "distribution_15.csv").read_text().splitlines()
    assert dist[0] == "index,energy,p_de,p_gamma" and tuple(dist[0].split(",")) == DISTRIBUTION_COLUMNS
    assert len(dist) == 17


def test_json_mirrors_csv(tmp_path, l4_report):
    write_report(l4_report, tmp_path / "c", "csv")
    write_report(l4_report, tmp_path / "j", "json")
    rows_csv = list(csv.DictReader(io.StringIO((tmp_path / "c" / "hierarchy.csv").read_text())))
    rows_json = json.loads((tmp_path / "j" / "hierarchy.json").read_text())
    assert [list(r) for r in rows_json][0] == list(HIERARCHY_COLUMNS)
    for a, b in zip(rows_csv, rows_json):
        assert float(a["dkl_nats"]) == b["dkl_nats"]


def test_empty_snapshots(tmp_path, l4_report):
    from dataclasses import replace

    report = run_hierarchy(replace(l4_report.config, snapshot_levels=()))
    bundle = write_report(report, tmp_path, "csv")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["hierarchy.csv", "manifest.json"]
    assert bundle_is_consistent(tmp_path)


def test_tampered_manifest_detected(tmp_path, l4_report):
    write_report(l4_report, tmp_path, "csv")
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["config"]["n_max"] = 14
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    assert not bundle_is_consistent(tmp_path)


def test_bad_format(tmp_path, l4_report):
    with pytest.raises(ValueError):
        write_report(l4_report, tmp_path, "xml")


# --- command line ---------------------------------------------------------

def test_cli_hierarchy_rows(tmp_path, l4_config):
    assert main(["hierarchy", "--config", str(l4_config), "--out", str(tmp_path / "out"), "--quiet"]) == 0
    lines = (tmp_path / "out" / "hierarchy.csv").read_text().splitlines()
    assert len(lines) == 17
    assert [int(line.split(",")[0]) for line in lines[1:]] == list(range(16))


def test_cli_runs_byte_identical(tmp_path, l4_config):
    for name in ("a", "b"):
        assert main(["hierarchy", "--config", str(l4_config), "--out", str(tmp_path / name), "--quiet"]) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_moments(capsys, l4_config):
    assert main(["moments", "--config", str(l4_config), "--nmax", "8"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 8
    for line in lines:
        k, a, b, _ = line.split()
        assert abs(float(a) - float(b)) <= 1e-9 * abs(float(a))


def test_cli_fidelity_default_grid(capsys, l4_config):
    assert main(["fidelity", "--config", str(l4_config)]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][:2] == ["t", "f_de"]
    assert float(rows[1][0]) == 0.0 and float(rows[1][1]) == pytest.approx(1.0, abs=1e-15)
    assert len(rows) == 102


def test_cli_distribution(tmp_path, capsys, l4_config):
    assert main(["distribution", "--config", str(l4_config), "--level", "3", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 16 and list(rows[0]) == list(DISTRIBUTION_COLUMNS)
    assert abs(sum(r["p_gamma"] for r in rows) - 1) < 1e-12


def test_cli_nmax_override(capsys, l4_config):
    assert main(["hierarchy", "--config", str(l4_config), "--nmax", "3"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 5


def test_cli_exit_codes(tmp_path, capsys, l4_config):
    assert main(["hierarchy", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**L4, "extra": 1}))
    assert main(["hierarchy", "--config", str(bad)]) == 1
    bad.write_text("{not json")
    assert main(["hierarchy", "--config", str(bad)]) == 1
    assert main(["hierarchy", "--config", str(l4_config), "--nmax", "99"]) == 1
    assert main(["distribution", "--config", str(l4_config), "--level", "16"]) == 1
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["hierarchy"])
    assert err.value.code == 1


def test_cli_numerical_failure_exit_2(tmp_path, capsys):
    # raw moments of order 2000 overflow double range
    cfg = tmp_path / "big.json"
    cfg.write_text(json.dumps({**L4, "chain": {"L": 10, "g": 1000.0, "h": 0.75, "J": 1.0}, "n_max": 30, "snapshot_levels": []}))
    assert main(["moments", "--config", str(cfg), "--nmax", "300"]) == 2
    assert "numerical" in capsys.readouterr().err


def test_cli_log_env(monkeypatch, capsys, l4_config):
    monkeypatch.setenv("MAXENT_LOG", "info")
    assert main(["hierarchy", "--config", str(l4_config), "--nmax", "2"]) == 0
    assert "level 2" in capsys.readouterr().err
    monkeypatch.setenv("MAXENT_LOG", "error")
    assert main(["hierarchy", "--config", str(l4_config), "--nmax", "2"]) == 0
    assert capsys.readouterr().err == ""
