"""Post-hoc invariant checkers over engine event logs.

Each checker takes the parsed log (see :func:`read_event_log`) and returns a
:class:`CheckResult`. They share no code with the engine apart from the PHY
helpers used to recompute SINRs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import phy
from .grouping import GroupPlan
from .mac import SimResult
from .params import Deployment, make_params


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def read_event_log(path: str | Path) -> dict[str, Any]:
    """Parse a JSON-lines log into header, segments, txops, collisions and backoff draws."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"event log {path} not found")
    log: dict[str, Any] = {"header": None, "segment": [], "txop": [], "collision": [], "backoff": []}
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "header":
                log["header"] = rec
            else:
                log[kind].append(rec)
    if log["header"] is None:
        raise ValueError(f"{path}: missing header line")
    return log


def result_log(result: SimResult, deployment: Deployment | None = None,
               plan: GroupPlan | None = None) -> dict[str, Any]:
    """The parsed form of ``result.write_event_log`` without touching disk."""
    return {
        "header": {
            "policy": result.policy, "horizon": result.horizon, "end_time": result.end_time,
            "deployment": deployment.to_dict() if deployment is not None else None,
            "plan": [list(g.stas) for g in plan.groups] if plan is not None else None,
            "params": result.params.to_dict(),
            "generated": None if result.saturated else result.generated_count().tolist(),
            "delivered": result.delivered_count.tolist(),
            "queued": None if result.saturated else result.queued_at_end().tolist(),
        },
        "segment": [{"kind": k, "start": a, "end": b} for k, a, b in result.segments],
        "txop": [{"id": t.txop_id, "start": t.start, "end": t.end, "initiator": t.initiator,
                  "coordinated": t.coordinated, "group": list(t.group),
                  "participants": [list(p) for p in t.participants]} for t in result.txops],
        "collision": [{"start": a, "end": b, "aps": list(aps)} for a, b, aps in result.collisions],
        "backoff": [{"ap": a, "cw": c, "value": v} for a, c, v in result.backoff_draws],
    }


def check_time_accounting(log) -> CheckResult:
    """Idle, collision and TXOP segments tile [0, end_time] with no gap or overlap."""
    segs = log["segment"]
    end = log["header"]["end_time"]
    if not segs:
        ok = end == 0
        return CheckResult("time_accounting", ok, "" if ok else f"no segments but end_time={end}")
    t = 0
    totals = {"idle": 0, "collision": 0, "txop": 0}
    for s in segs:
        if s["kind"] not in totals:
            return CheckResult("time_accounting", False, f"unknown segment kind {s['kind']!r}")
        if s["start"] != t or s["end"] < s["start"]:
            return CheckResult("time_accounting", False, f"segment {s} does not start at {t}")
        totals[s["kind"]] += s["end"] - s["start"]
        t = s["end"]
    busy_txop = sum(x["end"] - x["start"] for x in log["txop"])
    busy_col = sum(x["end"] - x["start"] for x in log["collision"])
    if t != end:
        return CheckResult("time_accounting", False, f"segments end at {t}, run ended at {end}")
    if (busy_txop, busy_col) != (totals["txop"], totals["collision"]):
        return CheckResult("time_accounting", False, "busy segments disagree with TXOP/collision records")
    if sum(totals.values()) != end:
        return CheckResult("time_accounting", False, f"durations sum to {sum(totals.values())} != {end}")
    return CheckResult("time_accounting", True, f"idle={totals['idle']} collision={totals['collision']} "
                                                f"txop={totals['txop']} us")


def check_conservation(log) -> CheckResult:
    """delivered + queued = generated per STA, and TXOP packet counts match deliveries."""
    h = log["header"]
    delivered = np.asarray(h["delivered"])
    sent = np.zeros_like(delivered)
    for t in log["txop"]:
        for _ap, sta, _mcs, n in t["participants"]:
            sent[sta] += n
    if not np.array_equal(sent, delivered):
        return CheckResult("conservation", False, f"TXOPs carried {sent.tolist()}, "
                                                  f"header says {delivered.tolist()}")
    if h["generated"] is None:
        return CheckResult("conservation", True, "saturated run: TXOP totals only")
    gen, queued = np.asarray(h["generated"]), np.asarray(h["queued"])
    bad = np.nonzero(delivered + queued != gen)[0]
    if bad.size:
        s = int(bad[0])
        return CheckResult("conservation", False,
                           f"STA {s}: delivered {delivered[s]} + queued {queued[s]} != generated {gen[s]}")
    return CheckResult("conservation", True, f"{int(delivered.sum())} delivered, {int(queued.sum())} queued")


def check_nav_safety(log) -> CheckResult:
    """No two transmissions overlap unless they belong to one triggered group."""
    busy = sorted([(t["start"], t["end"], "txop", t["id"]) for t in log["txop"]]
                  + [(c["start"], c["end"], "collision", -1) for c in log["collision"]])
    for (s0, e0, k0, i0), (s1, e1, k1, i1) in zip(busy, busy[1:]):
        if s1 < e0:
            return CheckResult("nav_safety", False, f"{k0} {i0} [{s0},{e0}) overlaps {k1} {i1} [{s1},{e1})")
    plan = log["header"].get("plan")
    plan_groups = {tuple(g) for g in plan} if plan is not None else None
    for t in log["txop"]:
        aps = [p[0] for p in t["participants"]]
        stas = [p[1] for p in t["participants"]]
        if len(set(aps)) != len(aps):
            return CheckResult("nav_safety", False, f"TXOP {t['id']}: an AP transmits twice")
        if t["initiator"] not in aps:
            return CheckResult("nav_safety", False, f"TXOP {t['id']}: sharing AP not transmitting")
        if not set(stas) <= set(t["group"]):
            return CheckResult("nav_safety", False, f"TXOP {t['id']}: STA outside the triggered group")
        if plan_groups is not None and tuple(t["group"]) not in plan_groups:
            return CheckResult("nav_safety", False, f"TXOP {t['id']}: group {t['group']} not in plan")
        if plan_groups is None and len(aps) > 1:
            return CheckResult("nav_safety", False, f"TXOP {t['id']}: concurrent APs without a plan")
    return CheckResult("nav_safety", True, f"{len(log['txop'])} TXOPs, {len(log['collision'])} collisions")


def check_capture(log, mcs_table=phy.DEFAULT_MCS_TABLE) -> CheckResult:
    """Every delivering link clears the capture threshold and its MCS is supported by its SNR."""
    h = log["header"]
    if h.get("deployment") is None:
        raise ValueError("capture check needs the deployment embedded in the log header")
    params = make_params(h["params"])
    dep = Deployment.from_dict(h["deployment"])
    rx = phy.rx_power_matrix(dep, params)
    cache: dict = {}
    worst = np.inf
    for t in log["txop"]:
        parts = [p for p in t["participants"] if p[3] > 0]
        key = tuple((a, s, m) for a, s, m, _ in parts)
        if key in cache:
            continue
        aps = [a for a, *_ in parts]
        for a, s, m, _ in parts:
            others = [b for b in aps if b != a]
            sinr = phy.sinr_from_rx(rx, s, a, others, params.noise_power_w)
            snr = phy.sinr_from_rx(rx, s, a, (), params.noise_power_w)
            if others and sinr < params.capture_threshold_db:
                return CheckResult("capture", False, f"TXOP {t['id']}: STA {s} SINR {sinr:.2f} dB "
                                                     f"< {params.capture_threshold_db} dB")
            best = phy.select_mcs(snr, mcs_table)
            if best is None or m > best.index:
                return CheckResult("capture", False, f"TXOP {t['id']}: STA {s} MCS {m} above SNR limit")
            if others:
                worst = min(worst, sinr)
        cache[key] = True
    detail = f"lowest concurrent SINR {worst:.2f} dB" if np.isfinite(worst) else "no concurrent links"
    return CheckResult("capture", True, detail)


def check_backoff(log) -> CheckResult:
    """Every drawn backoff lies in [0, CW] with CW a legal window size."""
    p = log["header"]["params"]
    legal = set()
    cw = p["cw_min"]
    while cw < p["cw_max"]:
        legal.add(cw)
        cw = 2 * cw + 1
    legal.add(p["cw_max"])
    for d in log["backoff"]:
        if d["cw"] not in legal or not 0 <= d["value"] <= d["cw"]:
            return CheckResult("backoff", False, f"illegal draw {d}")
    return CheckResult("backoff", True, f"{len(log['backoff'])} draws")


CHECKS: dict[str, Callable] = {
    "time_accounting": check_time_accounting,
    "conservation": check_conservation,
    "nav_safety": check_nav_safety,
    "capture": check_capture,
    "backoff": check_backoff,
}


def run_checks(log) -> list[CheckResult]:
    return [fn(log) for fn in CHECKS.values()]
