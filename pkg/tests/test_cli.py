import csv
import json
import math
import subprocess
import sys

import pytest

from wvbayes.cli import EXIT_IO, EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, SUMMARY_SCHEMA, SWEEP_FIELDS, main

EXAMPLE_FLAGS = ["--beta-re", "0.4472135955", "--gamma-re", "-0.894427191"]


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_analytic_worked_example(capsys):
    code, doc = run_json(capsys, ["analytic", *EXAMPLE_FLAGS])
    assert code == EXIT_OK
    re, im = doc["weak_values"]["B,D"]
    assert abs(re - (-1)) <= 1e-9 and abs(im) <= 1e-12
    assert abs(doc["port_probabilities"]["D"] - 0.1) <= 1e-9
    assert doc["provenance"]["command"] == "analytic"
    assert "version" in doc["provenance"]


def test_analytic_balanced_dark_port(capsys):
    code, doc = run_json(capsys, ["analytic"])
    assert code == EXIT_OK
    assert doc["weak_values"]["B,D"] == pytest.approx([0.5, 0.0], abs=1e-12)
    assert doc["weak_values"]["B,D'"] == "undefined (dark port)"
    assert doc["port_probabilities"]["D"] == pytest.approx(1.0, abs=1e-12)


def test_analytic_json_keys_are_stable(capsys):
    _, doc = run_json(capsys, ["analytic", *EXAMPLE_FLAGS])
    assert sorted(doc) == [
        "arm_probabilities",
        "bayes",
        "geometric_phase",
        "port_probabilities",
        "provenance",
        "uncertainty",
        "weak_values",
    ]
    assert sorted(doc["weak_values"]) == ["B,D", "B,D'", "C,D", "C,D'"]


def test_analytic_csv(capsys):
    assert main(["analytic", *EXAMPLE_FLAGS, "--format", "csv"]) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["key", "value"]
    assert any(r[0] == "port_probabilities.D" for r in rows)


def test_unnormalized_state_is_normalized_with_warning(capsys, caplog):
    code, doc = run_json(capsys, ["analytic", "--beta-re", "1", "--gamma-re", "-2"])
    assert code == EXIT_OK
    assert abs(doc["weak_values"]["B,D"][0] - (-1)) <= 1e-12
    assert "normalizing" in caplog.text


def simulate(tmp_path, name, *extra, photons=50_000):
    out = tmp_path / name
    code = main(["simulate", *EXAMPLE_FLAGS, "--photons", str(photons), "--seed", "11", "--out", str(out), *extra])
    assert code == EXIT_OK
    return out


def test_simulate_summary_is_byte_identical(tmp_path):
    a = simulate(tmp_path, "a.json")
    b = simulate(tmp_path, "b.json")
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["schema"] == SUMMARY_SCHEMA
    assert len(doc["runs"]) == 4
    assert doc["provenance"]["seed"] == 11


def test_simulate_shards_give_identical_sums(tmp_path):
    one = json.loads(simulate(tmp_path, "one.json").read_text())
    eight = json.loads(simulate(tmp_path, "eight.json", "--shards", "8").read_text())
    assert one["runs"] == eight["runs"]


def test_simulate_port_counts_match_exact_probability(tmp_path):
    doc = json.loads(simulate(tmp_path, "s.json", photons=1_000_000).read_text())
    run = next(r for r in doc["runs"] if r["arm"] == "B" and r["mode"] == "position")
    from wvbayes.mzi import GlassPlacement, worked_example_state
    from wvbayes.probe import GaussianProbe, exact_port_probability, port_wave

    p = exact_port_probability(port_wave(worked_example_state(), GlassPlacement("B", 0.05), GaussianProbe(), "D"))
    n = 1_000_000
    assert abs(run["ports"]["D"]["n"] / n - p) <= 5 * math.sqrt(p * (1 - p) / n)


def test_simulate_records(tmp_path):
    rec = tmp_path / "rec"
    simulate(tmp_path, "s.json", "--records", str(rec), photons=1000)
    files = sorted(p.name for p in rec.iterdir())
    assert files == [
        "records_B_momentum.csv",
        "records_B_position.csv",
        "records_C_momentum.csv",
        "records_C_position.csv",
    ]
    lines = (rec / "records_B_position.csv").read_text().splitlines()
    assert lines[0] == "index,port,observable,value" and len(lines) == 1001


def test_estimate_from_summary_equals_live(tmp_path, capsys):
    summary = simulate(tmp_path, "s.json", photons=1_000_000)
    code, saved = run_json(capsys, ["estimate", "--summary", str(summary)])
    assert code == EXIT_OK
    code, live = run_json(capsys, ["estimate", *EXAMPLE_FLAGS, "--photons", "1000000", "--seed", "11"])
    assert code == EXIT_OK
    assert saved["estimates"] == live["estimates"]
    est = saved["estimates"]
    assert est["consistency"]["passed"] is True
    cw = est["complex_wv[D]"]
    assert abs(complex(cw["point_re"], cw["point_im"]) + 1) <= 5 * cw["std_error"]
    assert est["complex_wv[D]"]["truth"] == pytest.approx([-1, 0], abs=1e-9)


def test_estimate_tampered_summary_fails(tmp_path, capsys):
    summary = simulate(tmp_path, "s.json", photons=200_000)
    doc = json.loads(summary.read_text())
    run = next(r for r in doc["runs"] if r["arm"] == "B" and r["mode"] == "position")
    run["ports"]["D'"]["z_sum"] = -run["ports"]["D'"]["z_sum"]
    summary.write_text(json.dumps(doc))
    code, out = run_json(capsys, ["estimate", "--summary", str(summary)])
    assert code == EXIT_TOLERANCE
    assert out["estimates"]["consistency"]["passed"] is False


def test_estimate_marks_degenerate_estimators(capsys):
    code, doc = run_json(capsys, ["estimate", "--photons", "20000"])
    assert code == EXIT_OK
    assert doc["estimates"]["complex_wv[D']"]["status"] == "skipped (degenerate)"
    assert doc["estimates"]["consistency"]["status"] == "skipped (degenerate)"


def test_tomography_command(capsys):
    code, doc = run_json(capsys, ["tomography", "--beta-re", "0.7071067811865476", "--gamma-im", "0.7071067811865476",
                                  "--gamma-re", "0", "--photons", "200000"])
    assert code == EXIT_OK
    rec = doc["reconstructed"]
    assert rec["fidelity_vs_input"] > 0.95


def test_bad_summary_schema(tmp_path, capsys):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"schema": "other"}))
    assert main(["estimate", "--summary", str(path)]) == EXIT_USAGE


def test_sweep_g_list(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", *EXAMPLE_FLAGS, "--g-list", "0.05,0.1", "--photons", "20000", "--out", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert tuple(rows[0]) == SWEEP_FIELDS
    assert len(rows) == 6
    shift = [r for r in rows if r["estimator"] == "shift[B,D]"]
    # first-order readout bias grows with g
    assert abs(float(shift[1]["model_bias_re"])) > abs(float(shift[0]["model_bias_re"]))


def test_sweep_single_point_is_usage_error(capsys):
    assert main(["sweep", "--g-list", "0.05", "--photons", "1000"]) == EXIT_USAGE
    assert main(["sweep", "--photons", "1000"]) == EXIT_USAGE


def test_invalid_config_is_usage_error(capsys):
    assert main(["simulate", "--photons", "0"]) == EXIT_USAGE
    assert main(["analytic", "--beta-re", "0", "--gamma-re", "0"]) == EXIT_USAGE


def test_io_errors(tmp_path, capsys):
    assert main(["analytic", "--out", str(tmp_path / "missing" / "x.json")]) == EXIT_IO
    assert main(["estimate", "--summary", str(tmp_path / "nope.json")]) == EXIT_IO
    assert "nope.json" in capsys.readouterr().err


def test_worked_example_passes(tmp_path):
    out = tmp_path / "example.json"
    assert main(["paper-example", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["passed"] and all(doc["checks"].values())
    assert doc["analytic_wv_BD"] == pytest.approx([-1, 0], abs=1e-12)
    # Z^B_D : Z^C_D is about -1 : 2
    assert abs(doc["z_ratio_BD_over_CD"] - (-0.5)) <= 0.1


def test_worked_example_tolerance_failure_exits_3(tmp_path):
    # far outside the weak regime the -1 readout is lost
    assert main(["paper-example", "--g", "3", "--photons", "100000", "--out", str(tmp_path / "p.json")]) == EXIT_TOLERANCE


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "wvbayes", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "wvbayes" in res.stdout
