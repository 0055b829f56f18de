import csv
import io
import json
from pathlib import Path

from pathprice import arrivals
from pathprice.cli import main as cli_main
from pathprice.harness import ExperimentSpec, catalog, run_experiment
from pathprice.metrics import CSV_COLUMNS


def small_line_spec(**overrides) -> ExperimentSpec:
    base = dict(
        id="T1",
        figure="fig2",
        description="small line sweep for tests",
        topology={"kind": "line", "node_count": 21, "capacity": 10.0},
        pattern=arrivals.LINE_STOCHASTIC,
        sweep_name="M",
        sweep_values=[{"M": 2}, {"M": 5}],
        gammas=[0.5, 2.0],
        n_seeds=2,
        seed_base=100,
        n_requests=40,
        m=1,
        M=5,
        p_bar=6.0,
        opt_time_limit=10.0,
    )
    base.update(overrides)
    return ExperimentSpec(**base)


def read_rows(path: Path) -> list[dict]:
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_catalog_contents():
    specs = catalog()
    assert set(specs) == {"E2", "E3", "E4", "E5", "E6", "E7", "E8"}
    assert specs["E4"].M == 50
    assert all(v.get("m") is not None for v in specs["E4"].sweep_values)
    assert specs["E5"].M == 8
    assert specs["E3"].n_seeds == 40
    assert specs["E3"].n_requests == 3000
    assert specs["E2"].topology["capacity"] == 100.0
    assert {v["M"] for v in specs["E6"].sweep_values} == {2, 4, 8, 16, 32, 64}
    assert [v["p_bar"] for v in specs["E8"].sweep_values] == [2, 4, 8, 16, 32, 64, 128]


def test_run_experiment_rows_and_schema(tmp_path):
    out = run_experiment(small_line_spec(), tmp_path)
    rows = read_rows(out)
    # 2 sweep values x 2 seeds x 2 gammas
    assert len(rows) == 8
    assert set(rows[0]) == set(CSV_COLUMNS)
    for row in rows:
        assert float(row["ratio"]) >= 1.0 - 1e-9
        assert 0.0 <= float(row["acceptance_rate"]) <= 1.0
        assert row["opt_exact"] == "1"


def test_run_experiment_deterministic_modulo_timestamp(tmp_path):
    spec = small_line_spec()
    a = run_experiment(spec, tmp_path / "a").read_text().splitlines()
    b = run_experiment(spec, tmp_path / "b").read_text().splitlines()
    assert a[0].startswith("#") and b[0].startswith("#")
    assert a[1:] == b[1:]


def test_run_experiment_parallel_matches_serial(tmp_path):
    spec = small_line_spec()
    a = run_experiment(spec, tmp_path / "serial", workers=1).read_text().splitlines()
    b = run_experiment(spec, tmp_path / "pool", workers=2).read_text().splitlines()
    assert a[1:] == b[1:]


def test_run_experiment_mirrored(tmp_path):
    out = run_experiment(small_line_spec(mirrored=True, sweep_values=[{"M": 3}]), tmp_path)
    rows = read_rows(out)
    assert len(rows) == 4
    # two independent directions double the request count
    assert all(int(r["n_requests"]) == 80 for r in rows)


def test_save_instances_and_log_file(tmp_path):
    spec = small_line_spec(save_instances=True, sweep_values=[{"M": 3}], n_seeds=1, gammas=[1.0])
    run_experiment(spec, tmp_path)
    assert (tmp_path / "T1.log").exists()
    saved = sorted((tmp_path / "instances").glob("*.jsonl"))
    assert len(saved) == 1
    # the saved instance replays against the saved network
    from pathprice.topology import Network

    net = Network.from_json((tmp_path / "instances" / "T1_M3_net.json").read_text())
    inst = arrivals.from_jsonl(saved[0].read_text(), net)
    assert arrivals.validate_instance(inst, net) == []
    assert len(inst.requests) == spec.n_requests


def test_gamma_opt_label(tmp_path):
    spec = small_line_spec(gammas=["opt"], sweep_values=[{"M": 4}], n_seeds=1)
    rows = read_rows(run_experiment(spec, tmp_path))
    assert rows[0]["gamma_label"] == "opt"
    assert float(rows[0]["gamma"]) > 1.0


def test_spec_json_roundtrip():
    spec = small_line_spec()
    clone = ExperimentSpec.from_json(spec.to_json())
    assert clone == spec


def test_cost_experiment_row(tmp_path):
    spec = ExperimentSpec(
        id="T8",
        figure="fig8",
        description="tiny cost sweep",
        topology={"kind": "line", "node_count": 2, "capacity": 10.0},
        pattern=arrivals.COST_WORST,
        sweep_name="p_bar",
        sweep_values=[{"p_bar": 4.0}],
        cost={"steps": 40, "eps_scale": 1e-2, "tol": 1e-2},
    )
    rows = read_rows(run_experiment(spec, tmp_path))
    assert len(rows) == 1
    row = rows[0]
    assert float(row["min_gamma"]) > 1.0
    assert float(row["ratio"]) <= float(row["min_gamma"]) * 1.1
    assert float(row["residual_max"]) <= 1e-4


def test_cli_list_and_bounds(capsys):
    assert cli_main(["list"]) == 0
    out = capsys.readouterr().out
    assert "E2" in out and "E8" in out
    assert cli_main(["bounds", "line_uniform", "--M", "10", "--points", "4"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].startswith("family,gamma")
    assert len(out) == 5


def test_cli_run_and_validate(tmp_path, capsys):
    spec = small_line_spec(sweep_values=[{"M": 3}], n_seeds=1, gammas=[1.0])
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(spec.to_json())
    assert cli_main(["run", str(spec_file), "--out", str(tmp_path / "res")]) == 0
    capsys.readouterr()

    # validate verb on a saved instance + network
    from pathprice.topology import build_line

    net = build_line(11, 5.0)
    inst = arrivals.gen_line_stochastic(net, 10, 1, 4, 6.0, 1.0, 3)
    net_file = tmp_path / "net.json"
    net_file.write_text(net.to_json())
    inst_file = tmp_path / "inst.jsonl"
    inst_file.write_text(arrivals.to_jsonl(inst))
    assert cli_main(["validate", str(inst_file), "--network", str(net_file)]) == 0
    assert "OK" in capsys.readouterr().out


def test_cli_bvp(capsys):
    assert cli_main(["bvp", "10", "4", "--tol", "1e-2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["min_gamma"] > 1.0
    assert doc["converged"]
