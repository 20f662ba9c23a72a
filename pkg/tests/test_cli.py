from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from su3radial import records
from su3radial.cli import (
    EXIT_BAD_BRACKET,
    EXIT_BLOWUP,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    ConfigError,
    build_config,
    main,
)
from su3radial.classifier import Kind
from su3radial.omega import scalar_oracle


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_solve_trivial_writes_zeros(tmp_path):
    code = main(["solve", "--n1", "0", "--n2", "0", "--alpha1", "0", "--alpha2", "0", "--out", str(tmp_path)])
    assert code == EXIT_OK
    table = rows(tmp_path / "trajectory.csv")
    assert tuple(table[0]) == records.TRAJECTORY_COLUMNS
    assert len(table) == 1 + records.DEFAULT_CHECKPOINTS
    body = np.array(table[1:], dtype=float)
    assert np.all(body[:, 2:8] == 0.0)
    assert body[-1, 8] < 1e-12
    report = json.loads((tmp_path / "diagnostics.json").read_text())
    assert report["negativity_ok"] is True
    assert report["classification"]["kind"] == "Topological"


def test_csv_number_format(tmp_path):
    main(["solve", "--alpha1=-1", "--alpha2=-1", "--out", str(tmp_path), "--checkpoints", "5"])
    table = rows(tmp_path / "trajectory.csv")
    assert len(table) == 6
    for cell in table[1]:
        mantissa = cell.split("e")[0].lstrip("-").replace(".", "")
        assert "e" in cell and len(mantissa) >= 15


def test_solve_blow_up_exit(tmp_path):
    assert main(["solve", "--alpha1", "1", "--alpha2", "1", "--out", str(tmp_path)]) == EXIT_BLOWUP


def test_missing_alpha_is_config_error(tmp_path, capsys):
    assert main(["solve", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["solve", "--alpha1", "0", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "alpha2" in capsys.readouterr().err


def test_json_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n1": 0, "n2": 0, "alpha1": -1, "alpha2": -1, "out": str(tmp_path / "o")}))
    assert main(["classify", "--config", str(cfg)]) == EXIT_OK
    data = json.loads((tmp_path / "o" / "classification.json").read_text())
    assert data["kind"] == "NonTopological"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["classify", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["classify", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_config_validation():
    with pytest.raises(ConfigError) as info:
        build_config({"n1": -1})
    assert info.value.field == "n1"
    with pytest.raises(ConfigError) as info:
        build_config({"rtol": 0})
    assert info.value.field == "rtol"
    with pytest.raises(ConfigError):
        build_config({"alpha1": 0, "alpha2": 0, "grid": "-1,1,-1,1,3,3"}).mode
    with pytest.raises(ConfigError) as info:
        build_config({"grid": {"alpha1_range": [0, 1], "resolution": [2, 2]}})
    assert info.value.field == "grid.alpha2_range"
    cfg = build_config({"grid": {"alpha1_range": [-1, 1], "alpha2_range": [-1, 1], "resolution": [3, 3]}})
    assert cfg.mode == "grid"


def test_scan_small_grid(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["scan", "--grid=-1,1,-1,1,3,3", "--out", str(out)]) == EXIT_OK
    summary = capsys.readouterr().out
    assert "points=9" in summary and "NonTopological=" in summary
    table = rows(out / "omega.csv")
    assert tuple(table[0]) == records.OMEGA_COLUMNS
    assert len(table) == 10
    for row in table[1:]:
        a1, a2 = float(row[0]), float(row[1])
        if a1 == a2:
            assert row[2] == scalar_oracle(0.0, a1)[1].kind.value
    meta = json.loads((out / "omega.json").read_text())
    assert meta["legend"] and len(meta["points"]) == 9


def test_scan_byte_identical(tmp_path):
    for name in ("a", "b"):
        main(["scan", "--grid=-1,1,-1,1,3,3", "--out", str(tmp_path / name)])
    assert (tmp_path / "a" / "omega.csv").read_bytes() == (tmp_path / "b" / "omega.csv").read_bytes()
    assert (tmp_path / "a" / "omega.json").read_bytes() == (tmp_path / "b" / "omega.json").read_bytes()


def test_scan_resolution_one(tmp_path):
    assert main(["scan", "--grid=-1,1,-1,1,1,3", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_boundary_command(tmp_path):
    assert main(["boundary", "--segment=-1,-1,1,1", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "boundary.json").read_text())
    assert data["boundary_kind"] == "Topological"
    assert max(abs(x) for x in data["alpha"]) < 1e-6
    assert data["bracket_width"] < 1e-6 and data["betas"] == [0.0, 0.0]


def test_boundary_reversed_bracket(tmp_path):
    assert main(["boundary", "--segment=1,1,-1,-1", "--out", str(tmp_path)]) == EXIT_BAD_BRACKET


def test_boundary_off_diagonal(tmp_path):
    code = main(["boundary", "--n1", "1", "--n2", "2", "--segment=-8,-15,0,-15", "--out", str(tmp_path)])
    assert code == EXIT_OK
    data = json.loads((tmp_path / "boundary.json").read_text())
    assert data["boundary_kind"] in {Kind.TOPOLOGICAL.value, Kind.MIXED_U.value, Kind.MIXED_V.value}


def test_check_trivial_passes(tmp_path):
    assert main(["check", "--alpha1", "0", "--alpha2", "0", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["passed"] and {c["name"] for c in report["checks"]} == {
        "negativity", "pohozaev", "identities", "intersections", "condition_star", "inequality"}


def test_check_grid_passes(tmp_path):
    assert main(["check", "--n1", "1", "--n2", "2", "--grid=-8,2,-8,2,4,4", "--out", str(tmp_path)]) == EXIT_OK


@pytest.mark.parametrize("name", ["negativity", "pohozaev", "identities", "condition_star"])
def test_check_injected_violation(tmp_path, name):
    code = main(["check", "--alpha1=-1", "--alpha2=-1", "--out", str(tmp_path), "--inject-violation", name])
    assert code == EXIT_CHECK_FAILED
    report = json.loads((tmp_path / "check.json").read_text())
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert failed == [name]


def test_oracle_command(tmp_path):
    assert main(["oracle", "--n1", "1", "--n2", "1", "--alpha1=-3", "--alpha2=-3", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "oracle.csv").exists()
    assert main(["oracle", "--n1", "1", "--n2", "2", "--alpha1=-3", "--alpha2=-3", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["oracle", "--n1", "1", "--n2", "1", "--bisect=-10,5", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "oracle_boundary.json").read_text())
    assert data["boundary_kind"] == "Topological"


def test_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["solve", "--alpha1", "0", "--alpha2", "0", "--out", str(blocker / "sub")]) == EXIT_IO


def test_jsonable_handles_nan():
    assert records.jsonable({"a": float("nan"), "b": np.float64(1.5), "c": (1, 2)}) == {"a": None, "b": 1.5, "c": [1, 2]}
    assert records.fmt(None) == "nan"
    assert records.fmt(1.0) == "1.0000000000000000e+00"


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "su3radial", "classify", "--alpha1", "1", "--alpha2", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_BLOWUP
    assert proc.stdout.startswith("BlowUp")


def test_oracle_takes_single_vortex_number_and_alpha(tmp_path, capsys):
    code = main(["oracle", "--n1", "1", "--alpha1=-2", "--out", str(tmp_path)])
    assert code == EXIT_BLOWUP
    assert (tmp_path / "oracle.csv").exists()
