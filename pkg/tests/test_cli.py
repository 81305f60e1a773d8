import csv
import io
import json
import subprocess
import sys

import pytest

from hcpfactor.cli import main


def test_help_and_bad_args(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["predict", "--algo", "nope", "--n", "64", "--grids", "2x2"]) == 2
    assert main(["predict", "--algo", "mlcaqr", "--grids", "2x2"]) == 2  # missing --n


def test_predict_csv(capsys):
    assert main(["predict", "--platform", "exascale", "--algo", "mlcaqr", "--n", "1048576"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["level"] for r in rows] == ["1", "2", "3"]
    assert rows[0]["algorithm"] == "mlcaqr" and rows[0]["schema_version"] == "1"


def test_predict_json_to_file(tmp_path):
    out = tmp_path / "p.json"
    code = main(["predict", "--grids", "2x2,4x4", "--algo", "mlcalu", "--n", "1024,2048",
                 "--format", "json", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 4


def test_missing_platform_file():
    assert main(["predict", "--platform", "/nonexistent.json", "--algo", "caqr", "--n", "64"]) == 2
    assert main(["predict", "--algo", "caqr", "--n", "64"]) == 2


@pytest.mark.parametrize("algo", ["caqr", "calu", "mlcaqr", "mlcalu1d", "mlcalu2d", "mlcannon"])
def test_simulate(capsys, algo):
    assert main(["simulate", "--grids", "2x2,2x2", "--algo", algo, "--n", "32",
                 "--blocks", "2,8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["residual"] <= 1e-12
    assert set(doc["ledger"]["levels"]) == {"1", "2"}


def test_simulate_shape_error(capsys):
    assert main(["simulate", "--grids", "2x2,2x2", "--algo", "mlcaqr", "--n", "30",
                 "--blocks", "2,8"]) == 2


def test_stability_small(capsys):
    assert main(["stability", "--gens", "random_normal,minij", "--n", "64", "--p-rows", "2,2",
                 "--blocks", "4,8"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 4
    assert main(["stability", "--gens", "bogus", "--n", "64"]) == 2


def test_verify(capsys):
    assert main(["verify"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all(line.startswith("PASS") for line in lines)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hcpfactor", "predict", "--grids", "2x2",
                           "--algo", "caqr", "--n", "64"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("algorithm,n,P,level")
