import csv
import json
from pathlib import Path

import pytest

from shrinker_spectra.cli import _encode, main
from shrinker_spectra.errors import ConfigError
from shrinker_spectra.scenario import load_scenario, observed_orders, parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_check_passes_and_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["check", "--scenario", str(SCENARIOS / "circle.json"), "--out", str(out)]) == 0
    for name in ("eigenvalues.csv", "report.json", "summary.txt"):
        assert (out / name).exists()
    doc = json.loads((out / "report.json").read_text())
    assert doc["summary"]["status"] == "pass"
    rows = list(csv.DictReader(open(out / "eigenvalues.csv")))
    assert rows[1]["multiplicity"] == "2"


def test_genuine_failure_exits_one(tmp_path):
    cfg = _write(tmp_path, "s.json", '{"name": "coarse", "geometry": {"kind": "sphere"}, "r": 0, '
                                     '"resolution": 4, "count": 10, "k": [3]}')
    assert main(["check", "--scenario", cfg, "--out", str(tmp_path / "o")]) == 1
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    failed = {r["theorem"] for r in doc["reports"] if not r["passed"]}
    assert "thm12-lambda1" in failed


def test_odd_order_exits_two_with_line(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.json", '{\n  "name": "bad",\n  "geometry": {"kind": "sphere", "n": 3},\n  "r": 1\n}\n')
    assert main(["check", "--scenario", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "even integer" in err


def test_unknown_key_exits_two(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.json", '{"name": "x",\n "geometry": {"kind": "circle"},\n "colour": 3}')
    assert main(["spectrum", "--scenario", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_missing_file_and_bad_json(tmp_path):
    assert main(["check", "--scenario", str(tmp_path / "nope.json")]) == 2
    cfg = _write(tmp_path, "bad.json", "{not json")
    assert main(["check", "--scenario", cfg]) == 2


def test_single_resolution_sweep_is_an_error(tmp_path):
    code = main(["sweep", "--scenario", str(SCENARIOS / "circle.json"), "--resolutions", "64",
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_report_is_byte_identical_across_runs(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}"
        assert main(["check", "--scenario", str(SCENARIOS / "disk_general.json"), "--out", str(out)]) == 0
        outs.append((out / "report.json").read_bytes())
    assert outs[0] == outs[1]


def test_oracle_flag(tmp_path):
    out = tmp_path / "o"
    assert main(["check", "--scenario", str(SCENARIOS / "sphere_r0.json"), "--oracle", "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["spectrum"]["values"][:4] == [0.0, 1.0, 1.0, 1.0]


def test_k_override(tmp_path):
    out = tmp_path / "o"
    assert main(["check", "--scenario", str(SCENARIOS / "cap_r0.json"), "--k", "3", "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    ks = {r["params"]["k"] for r in doc["reports"] if r["theorem"] == "thm11-quadratic"}
    assert ks == {3}


def test_sweep_reports_orders(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--scenario", str(SCENARIOS / "circle.json"), "--resolutions", "32", "64", "128",
                 "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert [row["resolution"] for row in doc["rows"]] == [32, 64, 128]
    assert not doc["suspicious_modes"]


def test_observed_orders_against_reference():
    orders = observed_orders([8, 16], [[1.04, 3.16], [1.01, 3.04]], [1.0, 3.0])
    assert orders == pytest.approx([2.0, 2.0])


def test_encoder():
    assert _encode(0.1) == "0.10000000000000001"
    assert _encode(float("nan")) == "null"
    assert _encode({"a": [1, 2.5], "b": None}) == '{\n  "a": [1, 2.5],\n  "b": null\n}'


def test_shipped_scenarios_parse():
    for p in sorted(SCENARIOS.glob("*.json")):
        sc = load_scenario(p)
        assert sc.name == p.stem


@pytest.mark.parametrize("data, fragment", [
    ({"geometry": {"kind": "torus"}}, "kind"),
    ({"geometry": {"kind": "sphere"}, "r": 2}, "r"),
    ({"geometry": {"kind": "sphere"}, "resolution": 2}, "resolution"),
    ({"geometry": {"kind": "sphere"}, "delta": -1}, "delta"),
    ({"geometry": {"kind": "sphere", "shape": 1}}, "shape"),
])
def test_parse_errors(data, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_scenario(dict(data, name="x"))
