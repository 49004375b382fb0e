import copy
import json

import pytest

from cosrsim import mac, verify
from cosrsim.grouping import optimize_plan
from cosrsim.params import generate_deployment, make_params
from cosrsim.traffic import TrafficSpec

P = make_params({"d_AP-AP": 15, "T_sim": 0.3})


@pytest.fixture(scope="module")
def cosr_log():
    dep = generate_deployment(P, 1)
    plan = optimize_plan(dep, P, "UNC")
    res = mac.run_cosr(dep, P, TrafficSpec("poisson", 9000.0), plan, seed=2, log=True)
    return verify.result_log(res, dep, plan)


def test_clean_log_passes(cosr_log):
    assert all(c.ok for c in verify.run_checks(cosr_log))


def test_dcf_capture_check_is_vacuous():
    dep = generate_deployment(P, 1)
    res = mac.run_dcf(dep, P, TrafficSpec("poisson", 9000.0), seed=2, log=True)
    check = verify.check_capture(verify.result_log(res, dep))
    assert check.ok and check.detail == "no concurrent links"


def test_overlapping_txop_detected(cosr_log):
    log = copy.deepcopy(cosr_log)
    t0, t1 = log["txop"][0], log["txop"][1]
    t1["start"] = t0["end"] - 5
    assert not verify.check_nav_safety(log).ok


def test_foreign_transmitter_detected(cosr_log):
    log = copy.deepcopy(cosr_log)
    t = next(t for t in log["txop"] if len(t["participants"]) == 1)
    a, s, m, n = t["participants"][0]
    intruder = next(x for x in range(8) if x not in t["group"])
    t["participants"].append([intruder // 2, intruder, m, 1])
    assert not verify.check_nav_safety(log).ok


def test_time_gap_detected(cosr_log):
    log = copy.deepcopy(cosr_log)
    log["segment"][3]["end"] -= 1
    assert not verify.check_time_accounting(log).ok


def test_lost_packet_detected(cosr_log):
    log = copy.deepcopy(cosr_log)
    log["header"]["queued"][0] += 1
    assert not verify.check_conservation(log).ok


def test_capture_violation_detected(cosr_log):
    log = copy.deepcopy(cosr_log)
    # every AP transmitting to the STA nearest another AP cannot clear 15 dB
    t = log["txop"][0]
    t["participants"] = [[a, 2 * a, 13, 1] for a in range(4)]
    t["participants"][1][1] = 3
    log["txop"] = [t]
    assert not verify.check_capture(log).ok


def test_illegal_backoff_detected(cosr_log):
    log = copy.deepcopy(cosr_log)
    log["backoff"].append({"ap": 0, "cw": 15, "value": 16})
    assert not verify.check_backoff(log).ok


def test_missing_inputs(tmp_path):
    with pytest.raises(FileNotFoundError):
        verify.read_event_log(tmp_path / "none.jsonl")
    (tmp_path / "bad.jsonl").write_text(json.dumps({"type": "segment"}) + "\n")
    with pytest.raises(ValueError):
        verify.read_event_log(tmp_path / "bad.jsonl")
    log = {"header": {"deployment": None}, "txop": []}
    with pytest.raises(ValueError):
        verify.check_capture(log)
