import csv
import json

import pytest

from cosrsim import cli, mac
from cosrsim.experiment import (ExperimentSpec, aggregate_rows, derive_seed, parse_seeds,
                                run_experiment, spec_from_config)
from cosrsim.grouping import optimize_plan
from cosrsim.metrics import summarize_result
from cosrsim.params import ConfigError, Deployment, make_params
from cosrsim.traffic import TrafficSpec

SHORT = {"T_sim": 0.3}


def small_spec(tmp_path, **kw):
    base = dict(params=make_params(SHORT), seeds=(0, 1), output_dir=tmp_path)
    base.update(kw)
    return ExperimentSpec(**base)


def test_outputs_written_and_deterministic(tmp_path):
    run_experiment(small_spec(tmp_path / "a"))
    run_experiment(small_spec(tmp_path / "b", workers=2))
    for name in ("runs.csv", "aggregate.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "runs.csv")))
    assert len(rows) == 2 * 3 * 2 * 8
    agg = list(csv.DictReader(open(tmp_path / "a" / "aggregate.csv")))
    assert len(agg) == 12
    assert {r["p99_reduction_vs_dcf"] for r in agg if r["policy"] == "DCF"} == {"0.0"}


def test_manifest_reproduces_a_single_run(tmp_path):
    result = run_experiment(small_spec(tmp_path))
    man = json.loads((tmp_path / "manifest.json").read_text())
    entry = man["deployments"][1]
    run = next(r for r in entry["runs"] if r["policy"] == "UNC" and r["traffic"] == "bursty")
    params = make_params(man["params"])
    dep = Deployment.from_dict(entry["deployment"])
    plan = optimize_plan(dep, params, "UNC")
    assert plan.digest() == entry["plans"]["UNC"]["digest"]
    spec = TrafficSpec.from_params("bursty", entry["calibration"]["rate"], params)
    res = mac.run_cosr(dep, params, spec, plan, run["engine_seed"], traffic_seed=run["traffic_seed"])
    _, net = summarize_result(res)
    row = next(r for r in result.network_rows()
               if r["seed"] == 1 and r["policy"] == "UNC" and r["traffic"] == "bursty")
    assert net.delay_p99 == row["delay_p99"]


def test_policies_share_arrival_streams(tmp_path):
    run_experiment(small_spec(tmp_path))
    man = json.loads((tmp_path / "manifest.json").read_text())
    for entry in man["deployments"]:
        for model in ("poisson", "bursty"):
            seeds = {(r["traffic_seed"], r["engine_seed"]) for r in entry["runs"] if r["traffic"] == model}
            assert len(seeds) == 1
    rows = list(csv.DictReader(open(tmp_path / "runs.csv")))
    gen = {}
    for r in rows:
        gen.setdefault((r["seed"], r["traffic"], r["sta"]), set()).add(r["generated"])
    assert all(len(v) == 1 for v in gen.values())


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(policies=())
    with pytest.raises(ConfigError):
        ExperimentSpec(policies=("CSMA",))
    with pytest.raises(ConfigError):
        ExperimentSpec(engine={"warp": "9"})
    with pytest.raises(ConfigError):
        spec_from_config({"sedes": 3})
    spec = spec_from_config({"params": {"d_AP-AP": 20}, "seeds": "3-5,9", "traffic": "poisson"})
    assert spec.seeds == (3, 4, 5, 9) and spec.traffic_models == ("poisson",)
    assert spec.params.inter_ap_distance == 20


def test_seed_helpers():
    assert parse_seeds(3) == (0, 1, 2) and parse_seeds([4, 2]) == (4, 2)
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(2, 1)


def test_aggregate_rows_pair_with_dcf():
    rows = [{"seed": 0, "traffic": "poisson", "policy": "DCF", "delay_p99": 10.0, "delay_p50": 2.0,
             "throughput": 1.0},
            {"seed": 0, "traffic": "poisson", "policy": "UNC", "delay_p99": 2.5, "delay_p50": 1.0,
             "throughput": 3.0}]
    unc = aggregate_rows(rows)[1]
    assert unc["p99_reduction_vs_dcf"] == 0.75 and unc["throughput_gain_vs_dcf"] == 2.0


def test_symmetric_saturated_throughput(tmp_path):
    spec = small_spec(tmp_path, deployment="symmetric", seeds=(0,), traffic_models=("saturated",),
                      params=make_params({"d_AP-AP": 15, "T_sim": 0.5}))
    rows = {r["policy"]: r for r in run_experiment(spec).network_rows()}
    assert rows["UNC"]["throughput"] > 3 * rows["DCF"]["throughput"]


def test_unsupported_scenario_reported(tmp_path):
    spec = small_spec(tmp_path, params=make_params({"d_AP-AP": 60, "T_sim": 0.1}), seeds=(0,))
    result = run_experiment(spec)
    assert result.failures and "contention domain" in result.failures[0].error
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["failures"][0]["seed"] == 0


# command line

def test_cli_run_verify_roundtrip(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("COSRSIM_OUTPUT_ROOT", str(tmp_path))
    rc = cli.main(["run", "--seeds", "1", "--set", "T_sim=0.2", "--policies", "DCF,UNC",
                   "--traffic", "bursty", "--event-logs", "--name", "b1"])
    assert rc == 0
    batch = tmp_path / "b1"
    assert (batch / "manifest.json").exists() and len(list((batch / "logs").glob("*.jsonl"))) == 2
    assert cli.main(["verify", str(batch)]) == 0
    assert "2/2 runs passed" in capsys.readouterr().out
    # corrupt one log: shift a TXOP onto its predecessor
    path = sorted((batch / "logs").glob("*UNC*.jsonl"))[0]
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    txops = [x for x in lines if x["type"] == "txop"]
    txops[1]["start"] = txops[0]["end"] - 3
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    assert cli.main(["verify", str(batch)]) == 1
    assert "nav_safety" in capsys.readouterr().out


def test_cli_verify_without_logs(tmp_path):
    assert cli.main(["verify", str(tmp_path)]) == 2


def test_cli_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("params:\n  d_AP-AP: 20\n  T_sim: 0.2\nseeds: [5]\n")
    assert cli.main(["calibrate", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("seed 5:")
    assert cli.main(["plan", "--config", str(cfg), "--seeds", "2", "--d-ap-ap", "10"]) == 0
    out = capsys.readouterr().out
    assert "seed 0 MAX2" in out and "seed 1 UNC" in out


def test_cli_plan_symmetric(capsys):
    assert cli.main(["plan", "--symmetric", "--d-ap-ap", "15", "--seeds", "1", "--policies", "UNC"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 3 and out[1].strip().startswith("AP0-STA0 AP1-STA2 AP2-STA4 AP3-STA6")


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["plan", "--set", "nonsense=1"]) == 2
    assert cli.main(["run", "--out", str(tmp_path / "x"), "--seeds", "1", "--d-ap-ap", "60",
                     "--set", "T_sim=0.1"]) == 1
