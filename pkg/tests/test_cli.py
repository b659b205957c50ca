import csv
import math

import pytest

from affinity_sim.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main
from affinity_sim.report import COLUMNS, ReportRow, read_csv, rows_to_csv, write_csv
from affinity_sim.scenario import PolicyEntry, Scenario, builtin_config, load_scenario


@pytest.fixture
def tiny_config(tmp_path):
    s = load_scenario(builtin_config("three_server"))
    s = Scenario(**{**s.__dict__, "horizon": 1500, "warmup": 100, "replications": 2,
                    "lambdas": [1.0, 2.0], "policies": [PolicyEntry("BlindGBPandas"), PolicyEntry("FCFS")]})
    path = tmp_path / "tiny.yaml"
    path.write_text(s.dumps())
    return path


def test_run_writes_csv_and_svg(tiny_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(tiny_config), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "three_server.csv")))
    assert len(rows) == 2 * 2 * 2
    assert list(rows[0]) == COLUMNS
    assert {r["policy"] for r in rows} == {"BlindGBPandas", "FCFS"}
    assert all(r["invariant_violations"] == "0" for r in rows)
    svg = (out / "three_server.svg").read_text()
    # self-contained: no embedded rasters, every link is a local fragment
    import re
    assert svg.lstrip().startswith("<?xml") and "<image" not in svg
    assert all(h.startswith("#") for h in re.findall(r'href="([^"]*)"', svg))


def test_run_is_byte_identical(tiny_config, tmp_path):
    for d in ("a", "b"):
        assert main(["sweep", "--config", str(tiny_config), "--out", str(tmp_path / d), "--no-plot"]) == 0
    assert (tmp_path / "a/three_server.csv").read_bytes() == (tmp_path / "b/three_server.csv").read_bytes()
    assert main(["run", "--config", str(tiny_config), "--out", str(tmp_path / "c"), "--no-plot",
                 "--seed", "99"]) == 0
    assert (tmp_path / "c/three_server.csv").read_bytes() != (tmp_path / "a/three_server.csv").read_bytes()


def test_sweep_lambda_override(tiny_config, tmp_path):
    assert main(["sweep", "--config", str(tiny_config), "--out", str(tmp_path), "--no-plot",
                 "--lambdas", "0.5", "--name", "one", "--no-invariants"]) == 0
    rows = read_csv(tmp_path / "one.csv")
    assert {r.lam for r in rows} == {0.5} and len(rows) == 4


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "nope.yaml" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_config_exit_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("system: {rates: [[1.0]], proportions: [0.5]}\nlambdas: [1]\npolicies: [{kind: FCFS}]\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_usage_errors_exit_2():
    assert main([]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["run", "--seed", "x"]) == EXIT_CONFIG


def test_capacity_command(capsys):
    assert main(["capacity", "--config", "three_server", "--samples", "20000"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lambda* = 2.50000" in out
    assert "effective lambda*" in out


def test_capacity_small_systems(tmp_path, capsys):
    for rates, props, want in (([[1.0]], [1.0], 1.0), ([[1.0, 0.5], [0.5, 1.0]], [0.5, 0.5], 2.0)):
        s = Scenario(name="x", rates=rates, proportions=props, lambdas=[0.1],
                     policies=[PolicyEntry("FCFS")], service_kind="deterministic")
        p = tmp_path / "x.yaml"
        p.write_text(s.dumps())
        assert main(["capacity", "--config", str(p)]) == 0
        line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("lambda*"))
        assert float(line.split()[2]) == pytest.approx(want, abs=1e-5)


def test_plot_command(tiny_config, tmp_path):
    main(["run", "--config", str(tiny_config), "--out", str(tmp_path), "--no-plot"])
    assert main(["plot", str(tmp_path / "three_server.csv"), "-o", str(tmp_path / "fig.svg")]) == 0
    assert (tmp_path / "fig.svg").stat().st_size > 1000
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(COLUMNS) + "\n")
    assert main(["plot", str(empty)]) == EXIT_CONFIG
    assert main(["plot", str(tmp_path / "missing.csv")]) == EXIT_CONFIG


def test_plot_marks_divergent_points(tmp_path):
    import xml.etree.ElementTree as ET

    from affinity_sim.plotting import completion_time_figure
    rows = [ReportRow("A", lam, r, 2.0 + lam, 100, slope, 0, r)
            for lam, slope in ((1.0, 0.0), (2.0, 0.0), (3.0, 0.5)) for r in (1, 2)]
    rows += [ReportRow("B", lam, 1, 3.0, 100, 0.0, 0, 1) for lam in (1.0, 2.0, 3.0)]
    path = completion_time_figure(rows, tmp_path / "f.svg")
    root = ET.parse(path).getroot()
    ids = [el.get("id", "") for el in root.iter()]
    assert sum(i.startswith("line2d") for i in ids) >= 3


def test_validate_command(capsys):
    assert main(["validate", "--horizon", "800"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS  invariant: workload recursion" in out
    assert "FAIL" not in out


def test_validate_negative_control(capsys):
    assert main(["validate", "--horizon", "800", "--inject-fault", "duplicate_service"]) != EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL  invariant: per-queue length update" in out


def test_invariant_violation_exit_3(tiny_config, tmp_path, monkeypatch):
    from affinity_sim import sim
    orig = sim.EngineConfig.__post_init__

    def faulty(self):
        orig(self)
        self.fault = "duplicate_service"
    monkeypatch.setattr(sim.EngineConfig, "__post_init__", faulty)
    assert main(["run", "--config", str(tiny_config), "--out", str(tmp_path), "--no-plot"]) == EXIT_INVARIANT


def test_internal_error_exit_4(tiny_config, tmp_path, monkeypatch):
    import affinity_sim.cli as cli

    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "sweep", boom)
    assert main(["run", "--config", str(tiny_config), "--out", str(tmp_path)]) == 4


def test_csv_round_trip_full_precision(tmp_path):
    rows = [ReportRow("BlindGBPandas", 0.1 + 0.2, 1, 1 / 3, 10, -1e-17, 0, 2**64 - 1),
            ReportRow("FCFS", 2.4, 2, math.nan, 0, 0.0, 0, 0)]
    write_csv(rows, tmp_path / "r.csv")
    back = read_csv(tmp_path / "r.csv")
    assert back[0] == rows[0]
    assert math.isnan(back[1].mean_completion_time)
    assert rows_to_csv(back) == rows_to_csv(rows)
