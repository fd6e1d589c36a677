import csv
import json

import pytest

from cli import main
from fxp import FxpTensor, execute_plan_trace
from report_io import GAIN_COLUMNS, STAGE_COLUMNS, load_report, save_report
from simulator import CostReport, with_baseline
from util import run_operations

from conftest import CALIBRATION, FIXTURES

OUTPUTS = ("plan.json", "report.json", "baseline.json", "stages.csv")


def totals_report(workload: str, latency_s: float, energy_j: float) -> CostReport:
    return CostReport(workload=workload, objective="energy", stages=[], total_latency_s=latency_s,
                      total_energy_j=energy_j, bytes_transferred=0)


@pytest.mark.parametrize("name", ["fire", "bottleneck", "shufflenet_unit"])
def test_plan_beats_gpu_only_on_favorable_calibration(name, tmp_path, capsys):
    assert main(["plan", "--model", f"builtin:{name}", "--objective", "energy", "--out", str(tmp_path)]) == 0
    assert all((tmp_path / output).exists() for output in OUTPUTS)
    report = load_report(tmp_path / "report.json")
    assert report.energy_gain >= 1.2
    assert report.speedup >= 1.0
    assert "energy gain" in capsys.readouterr().out

    baseline = load_report(tmp_path / "baseline.json")
    assert report.baseline.total_energy_j == baseline.total_energy_j
    assert baseline.energy_gain == baseline.speedup == 1.0


def test_gpu_dominant_calibration_gains_nothing(tmp_path):
    assert main(["plan", "--model", "builtin:fire", "--calibration", str(CALIBRATION / "gpu_dominant.csv"),
                 "--out", str(tmp_path)]) == 0
    plan = json.loads((tmp_path / "plan.json").read_text(encoding="utf-8"))
    assert {d["kind"] for d in plan["decisions"].values()} == {"GpuOnly"}
    report = load_report(tmp_path / "report.json")
    assert (report.energy_gain, report.speedup) == (1.0, 1.0)
    assert report.bytes_transferred == 0


def test_plan_outputs_are_byte_identical_across_runs(tmp_path):
    for run in ("a", "b"):
        assert main(["plan", "--model", "builtin:shufflenet_unit", "--objective", "weighted:0.5",
                     "--out", str(tmp_path / run)]) == 0
    for output in OUTPUTS:
        assert (tmp_path / "a" / output).read_bytes() == (tmp_path / "b" / output).read_bytes(), output


def test_stage_table_columns(tmp_path):
    assert main(["plan", "--model", "builtin:bottleneck", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "stages.csv", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == STAGE_COLUMNS
    report = load_report(tmp_path / "report.json")
    assert [row["stage_id"] for row in rows] == [stage.stage_id for stage in report.stages]
    assert sum(float(row["energy_j"]) for row in rows) == pytest.approx(report.total_energy_j)


def test_simulate_reproduces_the_planned_report(tmp_path):
    planned, simulated = tmp_path / "planned", tmp_path / "simulated"
    assert main(["plan", "--model", "builtin:fire", "--out", str(planned)]) == 0
    assert main(["simulate", "--model", str(FIXTURES / "models" / "fire.model"),
                 "--plan", str(planned / "plan.json"), "--out", str(simulated)]) == 0
    assert (planned / "report.json").read_bytes() == (simulated / "report.json").read_bytes()
    assert not (simulated / "plan.json").exists()


def test_simulate_defaults_to_gpu_only(capsys):
    assert main(["simulate", "--model", "builtin:fire"]) == 0
    assert "energy gain 1.00x, speedup 1.00x" in capsys.readouterr().out


def test_verify_passes_for_the_optimized_plan(capsys):
    assert main(["verify", "--model", "builtin:bottleneck:h=8,w=8", "--count", "4", "--seed", "7"]) == 0
    assert capsys.readouterr().out.strip() == "verify bottleneck: PASS (4 cases, seed 7)"


def test_verify_reports_a_mismatch_on_stderr(monkeypatch, capsys):
    def corrupted(graph, plan, x, store):
        trace = dict(execute_plan_trace(graph, plan, x, store))
        out = trace[graph.output_id]
        values = out.values.copy()
        values[0, 0, 0] = values[0, 0, 0] ^ 1
        trace[graph.output_id] = FxpTensor(values, out.fraction_bits)
        return trace

    monkeypatch.setattr(run_operations, "execute_plan_trace", corrupted)
    assert main(["verify", "--model", "builtin:fire:h=4,w=4,c=8", "--count", "2"]) == 1
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "verify fire: FAIL at case 0: layer 'concat' element (0, 0, 0): " in captured.err


def test_verify_rejects_a_bad_split_plan(capsys):
    plan = FIXTURES / "plans" / "fire_bad_split.json"
    assert main(["verify", "--model", str(FIXTURES / "models" / "fire.model"), "--plan", str(plan)]) == 1
    err = capsys.readouterr().err
    assert err.startswith(f"error: {plan}: expand3x3: ")
    assert "g=99" in err


def test_missing_calibration_names_the_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["plan", "--model", "builtin:fire", "--calibration", str(missing)]) == 1
    assert capsys.readouterr().err.strip() == f"error: {missing}: file not found"


@pytest.mark.parametrize("flag", ["--model", "--calibration", "--device-config", "--plan"])
def test_non_utf8_input_names_the_file(flag, tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_bytes(b"name x\n\xff\xfe\n")
    argv = ["simulate", "--model", "builtin:fire", flag, str(bad)]
    if flag == "--model":
        argv = ["simulate", "--model", str(bad)]
    assert main(argv) == 1
    assert capsys.readouterr().err.strip() == f"error: {bad}: not UTF-8 text (byte 7)"


def test_bad_device_config_names_the_key(capsys):
    config = FIXTURES / "devices" / "unknown_key.json"
    assert main(["plan", "--model", "builtin:fire", "--device-config", str(config)]) == 1
    assert f"{config}: fpga.dsp_count: " in capsys.readouterr().err


def test_model_errors_name_the_node(capsys):
    model = FIXTURES / "models" / "dangling_pred.model"
    assert main(["simulate", "--model", str(model)]) == 1
    assert f"{model}: b: " in capsys.readouterr().err


def test_bad_g_grid_is_reported(capsys):
    assert main(["plan", "--model", "builtin:fire", "--g-grid", "3,x"]) == 1
    assert "--g-grid" in capsys.readouterr().err


def test_bad_objective_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["plan", "--model", "builtin:fire", "--objective", "weighted:2"])
    assert info.value.code == 2
    assert "alpha" in capsys.readouterr().err


def test_report_table(tmp_path, capsys):
    fire = with_baseline(totals_report("fire", 1.0e-3, 100e-3), totals_report("fire", 1.01e-3, 134e-3))
    flat = with_baseline(totals_report("flat", 2.0, 3.0), totals_report("flat", 2.0, 3.0))
    paths = [tmp_path / "fire.json", tmp_path / "flat.json"]
    save_report(paths[0], fire)
    save_report(paths[1], flat)

    assert main(["report", *map(str, paths), "--out", str(tmp_path / "table")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["workload", "energy", "gain", "speedup", "energy", "reduction", "latency",
                                "reduction"]
    assert lines[1].split()[:3] == ["fire", "1.34x", "1.01x"]
    assert lines[2].split()[:3] == ["flat", "1.00x", "1.00x"]

    with open(tmp_path / "table" / "gains.csv", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == GAIN_COLUMNS
    assert rows[0]["energy_gain"] == "1.34x"
    assert rows[1]["energy_reduction"] == "0.0%"
    assert (tmp_path / "table" / "gains.txt").read_text(encoding="utf-8") == "\n".join(lines) + "\n"


def test_report_requires_a_baseline(tmp_path, capsys):
    path = tmp_path / "bare.json"
    save_report(path, totals_report("bare", 1.0, 1.0))
    assert main(["report", str(path)]) == 1
    assert capsys.readouterr().err.strip() == f"error: {path}: bare: report carries no GPU-only baseline"


def test_report_rejects_other_schema_versions(tmp_path, capsys):
    path = tmp_path / "old.json"
    document = with_baseline(totals_report("old", 1.0, 1.0), totals_report("old", 1.0, 1.0)).model_dump(mode="json")
    document["schema_version"] = "0.9"
    path.write_text(json.dumps(document), encoding="utf-8")
    assert main(["report", str(path)]) == 1
    assert "schema_version: unsupported report schema '0.9'" in capsys.readouterr().err
