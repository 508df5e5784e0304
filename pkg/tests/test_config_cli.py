import csv
import io
import json
import math
import re
import subprocess
import sys
from fractions import Fraction

import pytest

from birkhoff_spectra.cli import COLUMNS, csv_body, main
from birkhoff_spectra.config import (
    ConfigError,
    load_config,
    parse_digit_set,
    parse_floats,
    parse_key_values,
    parse_points,
    parse_subsystems,
    resolve,
)

ERROR_LINE = re.compile(r"^birkhoff-spectra: error\[(validation|numerical)\]: \S.*$")


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------


def test_value_parsers():
    assert parse_floats("0:1:3, 5") == (0.0, 0.5, 1.0, 5.0)
    assert parse_points("1/3, 0.25") == (Fraction(1, 3), 0.25)
    assert parse_digit_set("all") is None
    assert parse_digit_set("1-3, 7") == (1, 2, 3, 7)
    assert parse_subsystems("1,2; all") == ((1, 2), None)
    with pytest.raises(ValueError):
        parse_digit_set("0,1")
    with pytest.raises(ValueError):
        parse_floats("0:1:0")


def test_resolve_defaults_and_rejections():
    cfg = resolve({})
    assert cfg["model.kind"] == "renyi"
    assert cfg.truncation.j_max == 400
    with pytest.raises(ConfigError, match="unknown"):
        resolve({"truncation.jmax": "3"})
    with pytest.raises(ConfigError, match="truncation.depth"):
        resolve({"truncation.depth": "3"})
    with pytest.raises(ConfigError):
        resolve({"tol.pressure": "-1"})
    with pytest.raises(ConfigError):
        resolve({"model.kind": "custom"})


def test_key_value_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# comment\nmodel.kind = gauss   # trailing\n\ntruncation.j_max = 50\n")
    cfg = load_config(path, {"truncation.j_max": "60"})
    assert cfg["model.kind"] == "gauss" and cfg["truncation.j_max"] == 60
    with pytest.raises(ConfigError, match="duplicate"):
        parse_key_values("a.b = 1\na.b = 2")
    with pytest.raises(ConfigError, match="key = value"):
        parse_key_values("just words")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.conf")


def test_embedded_lines_take_precedence():
    text = "# birkhoff-spectra x generated now\n# config: model.kind = gauss\nalpha,b\n1,2\n"
    assert parse_key_values(text) == {"model.kind": "gauss"}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def test_dimension_report(capsys):
    code, out, _ = run_cli(capsys, "dimension", "--set", "model.kind=gauss", "--set", "dimension.subsystems=1,2", "--workers", "1")
    assert code == 0
    (row,) = rows_of(out)
    assert row["subsystem"] == "1,2"
    assert float(row["dimension"]) == pytest.approx(0.5313, abs=1e-4)


def test_flat_spectrum_rows(capsys):
    code, out, _ = run_cli(
        capsys, "spectrum", "--set", "potential.name=b1_pow", "--set", "potential.r=1",
        "--set", "spectrum.alphas=2.5, 4", "--workers", "1",
    )
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 2
    assert all(r["flat"] == "1" and float(r["b"]) == 1.0 and r["case"] == "FLAT_INFTY" for r in rows)


def test_check_passes_on_renyi(capsys):
    code, out, _ = run_cli(capsys, "check")
    assert code == 0
    rows = rows_of(out)
    assert {r["condition"] for r in rows} >= {"G", "F", "NERI1", "NERI3a", "NERI3b", "P", "R", "L"}
    assert all(r["passed"] == "1" for r in rows)
    growth = next(r for r in rows if r["condition"] == "G")
    assert float(growth["value"]) <= 4.0 * (1 + 1e-9)


def test_bcf_report(capsys):
    code, out, _ = run_cli(capsys, "bcf", "--set", "bcf.x=1/3, 0", "--set", "bcf.n=3")
    assert code == 0
    third, zero = rows_of(out)
    assert third["digits_head"] == "2 3 2" and third["terminated"] == "1"
    assert float(zero["average"]) == pytest.approx(math.log(2))


def test_sample_report(capsys):
    code, out, _ = run_cli(
        capsys, "sample", "--set", "sample.alpha=1.2", "--set", "sample.length=20000", "--seed", "3",
    )
    assert code == 0
    (row,) = rows_of(out)
    assert row["seed"] == "3" and row["length"] == "20000"
    assert float(row["average"]) == pytest.approx(1.2, abs=0.1)


def test_pressure_grid_is_flat(capsys):
    code, out, _ = run_cli(capsys, "pressure", "--set", "pressure.b=0.7,0.9", "--set", "pressure.q=0,0.2", "--workers", "2")
    assert code == 0
    rows = rows_of(out)
    assert [(r["b"], r["q"]) for r in rows] == [("0.69999999999999996", "0"), ("0.69999999999999996", "0.20000000000000001"), ("0.90000000000000002", "0"), ("0.90000000000000002", "0.20000000000000001")]
    assert list(rows[0]) == list(COLUMNS["pressure"])


# --------------------------------------------------------------------------
# exit codes
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["pressure", "--set", "nonsense.key=1"],
        ["pressure", "--set", "truncation.j_max=abc"],
        ["pressure", "--set", "novalue"],
        ["pressure", "--set", "model.kind=custom"],
        ["pressure", "--config", "/nonexistent/run.conf"],
        ["pressure", "--workers", "0"],
        ["pressure", "--set", "potential.name=digit_expr", "--set", "potential.expr=import os"],
    ],
)
def test_validation_errors_exit_2(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 2 and out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1 and ERROR_LINE.match(lines[0]) and "validation" in lines[0]


def test_numerical_failure_exits_3(capsys):
    code, _, err = run_cli(capsys, "sample", "--set", "sample.b=1", "--set", "sample.q=0", "--set", "sample.length=10")
    assert code == 3
    line = err.strip().splitlines()[-1]
    assert ERROR_LINE.match(line) and "numerical" in line


def test_unbracketed_spectrum_exits_3_with_report(capsys):
    # α below log 2 has an empty level set
    code, out, err = run_cli(capsys, "spectrum", "--set", "spectrum.alphas=0.5", "--workers", "1")
    assert code == 3
    assert rows_of(out)[0]["case"] == "BOUNDARY"
    assert ERROR_LINE.match(err.strip().splitlines()[-1])


# --------------------------------------------------------------------------
# reproducibility
# --------------------------------------------------------------------------


def test_determinism_across_worker_counts(tmp_path, capsys):
    args = ["spectrum", "--set", "spectrum.alphas=1.0, 1.5", "--set", "truncation.nodes=16"]
    one, four = tmp_path / "one.csv", tmp_path / "four.csv"
    assert main(args + ["--workers", "1", "--out", str(one)]) == 0
    assert main(args + ["--workers", "4", "--out", str(four)]) == 0
    assert csv_body(one.read_text()) == csv_body(four.read_text())
    assert one.read_text().splitlines()[0].startswith("# birkhoff-spectra spectrum generated ")


def test_sample_determinism(tmp_path):
    args = ["sample", "--set", "sample.alpha=1.5", "--set", "sample.length=5000", "--set", "sample.seeds=1 2"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(first)]) == 0
    assert main(args + ["--out", str(second)]) == 0
    assert csv_body(first.read_text()) == csv_body(second.read_text())


def test_report_round_trip(tmp_path):
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert main(["pressure", "--set", "model.kind=gauss", "--set", "pressure.b=0.6", "--set", "pressure.q=0.1", "--out", str(first)]) == 0
    assert main(["pressure", "--config", str(first), "--out", str(second)]) == 0
    assert csv_body(first.read_text()) == csv_body(second.read_text())
    assert "# config: model.kind = gauss" in first.read_text()


def test_json_output(capsys):
    code, out, _ = run_cli(capsys, "bcf", "--format", "json", "--set", "bcf.x=0.5", "--set", "bcf.n=2")
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "bcf" and doc["columns"] == list(COLUMNS["bcf"])
    assert doc["rows"][0]["digits_head"] == "3 2"
    assert doc["config"]["bcf.n"] == "2"


def test_help_lists_columns(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for name, cols in COLUMNS.items():
        assert f"{name}" in text and ", ".join(cols) in text


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "birkhoff_spectra", "bcf", "--set", "bcf.x=0", "--set", "bcf.n=4"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "2 2 2 2" in proc.stdout
