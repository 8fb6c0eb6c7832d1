import json
import math

import pytest

from wehrlab.cli import main
from wehrlab.stability import CSV_FIELDS


@pytest.fixture(autouse=True)
def isolated_config(config_file):
    return config_file


def run(*argv: str) -> int:
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    return exc.value.code


def run_json(capsys, *argv: str) -> dict:
    assert run(*argv) == 0
    return json.loads(capsys.readouterr().out)


@pytest.mark.parametrize("N, M, d", [(1, 2, 3), (2, 2, 6), (3, 4, 35)])
def test_info(capsys, N, M, d):
    report = run_json(capsys, "info", "--N", str(N), "--M", str(M))
    assert report["d"] == d
    assert len(report["index_order"]) == d
    assert report["config"]["N"] == N
    assert "version" in report


def test_usage_errors(capsys):
    assert run("info", "--N", "0", "--M", "2") == 2
    assert "Error" in capsys.readouterr().err
    assert run("hessian", "--N", "1", "--M", "2", "--phi", "cosh") == 2
    assert run() == 2


def test_missing_state_file(tmp_path):
    assert run("distance", "--state", str(tmp_path / "missing.json")) == 3


def test_state_then_distance(tmp_path, capsys):
    path = tmp_path / "e1.json"
    assert run("state", "--N", "1", "--M", "2", "--basis", "1", "-o", str(path)) == 0
    report = run_json(capsys, "distance", "--state", str(path))
    assert report["T"] == pytest.approx(0.5, abs=1e-10)
    assert report["dist_geodesic"] == pytest.approx(math.pi / 4, abs=1e-6)


def test_coherent_entropy(tmp_path, capsys):
    path = tmp_path / "coherent.json"
    assert run("state", "--N", "1", "--M", "2", "--coherent", "0.5+0.2j", "-o", str(path)) == 0
    report = run_json(capsys, "entropy", "--state", str(path), "--phi", "pow:2")
    assert report["value"] == pytest.approx(0.2, abs=1e-4)
    assert report["sup_G"] == pytest.approx(0.2, abs=1e-12)
    assert report["config"]["scheme"] == "tensor:64"


def test_hessian(capsys):
    report = run_json(capsys, "hessian", "--N", "1", "--M", "2")
    assert report["by_degree"]["2"] == pytest.approx(-4.0 / 15.0, abs=1e-10)
    assert report["by_degree"]["1"] == pytest.approx(0.0, abs=1e-10)


def test_scan_output_is_reproducible(tmp_path):
    args = ["scan", "--N", "1", "--M", "2", "--samples", "3", "--seed", "7"]
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert run(*args, "--threads", "1", "-o", str(first)) == 0
    assert run(*args, "--threads", "2", "-o", str(second)) == 0
    assert first.read_bytes() == second.read_bytes()
    report = json.loads(first.read_text())
    assert report["aggregates"]["count"] == 3
    assert report["aggregates"]["min_ratio"] > 0.0


def test_scan_csv(capsys):
    assert run("scan", "--N", "1", "--M", "2", "--samples", "2", "-f", "csv") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 3


def test_profile_supplies_defaults(config_file, capsys):
    assert run("hessian", "--N", "1", "--M", "3", "-p", "nope") == 2
    config_file.parent.mkdir(parents=True)
    config_file.write_text('phi = "pow:3"\n')
    report = run_json(capsys, "hessian", "--N", "1", "--M", "3")
    assert report["phi"] == "pow:3"


def test_verify_quick(capsys):
    report = run_json(capsys, "verify", "--N", "1", "--M", "2")
    assert report["passed"] is True


def test_verify_linear_states(capsys):
    report = run_json(capsys, "verify", "--N", "1", "--M", "1")
    assert report["passed"] is True
    skipped = {check["name"] for check in report["checks"] if "skipped" in check["measured"]}
    assert skipped == {"h_tilde_integral_identity", "geodesic_distance_upper_bound"}
