"""Batch experiments: deployments x policies x traffic models.

For every deployment seed the runner generates the deployment, calibrates
the offered load once, computes the grouping plans and then simulates every
(policy, traffic model) cell. All policies of one deployment and traffic
model share the same arrival streams and engine seed, so their delays can
be compared pairwise.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import mac
from .grouping import GroupPlan, PlanError, optimize_plan
from .metrics import NETWORK_COLUMNS, STA_COLUMNS, summarize_result, sta_rows, write_rows
from .params import (ConfigError, Deployment, SimParams, generate_deployment, make_params,
                     symmetric_example)
from .traffic import CalibrationError, TrafficSpec, calibrate_load

log = logging.getLogger(__name__)

POLICIES = ("DCF", "MAX2", "UNC")
TRAFFIC_MODELS = ("poisson", "bursty", "saturated")
OUTPUT_ENV = "COSRSIM_OUTPUT_ROOT"

ENGINE_DEFAULTS = {"mcs_mode": "active", "mapc_overhead": "group", "sta_selection": "fifo",
                   "member_backoff": "reset"}


def derive_seed(*keys: int) -> int:
    """A 32-bit seed determined by the key tuple (independent streams per key)."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


# stream tags for derive_seed
_CAL, _TRAFFIC, _ENGINE = 1, 2, 3
_MODEL_TAG = {"poisson": 0, "bursty": 1, "saturated": 2}


@dataclass(frozen=True)
class ExperimentSpec:
    params: SimParams = field(default_factory=SimParams)
    policies: tuple[str, ...] = POLICIES
    traffic_models: tuple[str, ...] = ("poisson", "bursty")
    seeds: tuple[int, ...] = tuple(range(10))
    deployment: str = "random"          # or "symmetric"
    load_fraction: float = 0.9
    engine: Mapping[str, str] = field(default_factory=lambda: dict(ENGINE_DEFAULTS))
    event_logs: bool = False
    workers: int = 1
    output_dir: Path | None = None

    def __post_init__(self):
        if not self.policies or not self.traffic_models or not self.seeds:
            raise ConfigError("need at least one policy, one traffic model and one seed")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise ConfigError(f"unknown policies {bad}; choose from {POLICIES}")
        bad = [m for m in self.traffic_models if m not in TRAFFIC_MODELS]
        if bad:
            raise ConfigError(f"unknown traffic models {bad}; choose from {TRAFFIC_MODELS}")
        if self.deployment not in ("random", "symmetric"):
            raise ConfigError(f"deployment must be 'random' or 'symmetric', got {self.deployment!r}")
        unknown = set(self.engine) - set(ENGINE_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown engine options {sorted(unknown)}")
        if not 0 < self.load_fraction <= 1:
            raise ConfigError("load_fraction must lie in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def engine_options(self) -> dict[str, str]:
        return {**ENGINE_DEFAULTS, **self.engine}


def spec_from_config(cfg: Mapping[str, Any]) -> ExperimentSpec:
    """Build a spec from a parsed config mapping (see README for the keys)."""
    cfg = dict(cfg)
    known = {"params", "policies", "traffic", "seeds", "deployment", "load_fraction", "engine",
             "event_logs", "workers", "output_dir"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kw: dict[str, Any] = {"params": make_params(cfg.get("params") or {})}
    if "policies" in cfg:
        kw["policies"] = tuple(cfg["policies"])
    if "traffic" in cfg:
        t = cfg["traffic"]
        kw["traffic_models"] = (t,) if isinstance(t, str) else tuple(t)
    if "seeds" in cfg:
        kw["seeds"] = parse_seeds(cfg["seeds"])
    for k in ("deployment", "load_fraction", "event_logs", "workers"):
        if k in cfg:
            kw[k] = cfg[k]
    if "engine" in cfg:
        kw["engine"] = dict(cfg["engine"])
    if cfg.get("output_dir"):
        kw["output_dir"] = Path(cfg["output_dir"])
    return ExperimentSpec(**kw)


def parse_seeds(value) -> tuple[int, ...]:
    """An int ``n`` means seeds 0..n-1; strings may be ``"a-b"`` ranges or comma lists."""
    if isinstance(value, int):
        return tuple(range(value))
    if isinstance(value, str):
        out: list[int] = []
        for part in value.split(","):
            part = part.strip()
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
        return tuple(out)
    return tuple(int(v) for v in value)


def make_deployment(spec: ExperimentSpec, seed: int) -> Deployment:
    if spec.deployment == "symmetric":
        return symmetric_example(spec.params)
    return generate_deployment(spec.params, seed)


@dataclass
class DeploymentOutcome:
    seed: int
    sta_rows: list[dict] = field(default_factory=list)
    network_rows: list[dict] = field(default_factory=list)
    manifest: dict[str, Any] = field(default_factory=dict)
    error: str | None = None


def run_deployment(spec: ExperimentSpec, seed: int) -> DeploymentOutcome:
    """All (policy, traffic) cells of one deployment."""
    params = spec.params
    out = DeploymentOutcome(seed)
    dep = make_deployment(spec, seed)
    engine = spec.engine_options()
    cal_seed = derive_seed(seed, _CAL)
    try:
        cal = calibrate_load(dep, params, cal_seed, spec.load_fraction)
        plans: dict[str, GroupPlan | None] = {"DCF": None}
        for pol in spec.policies:
            if pol != "DCF":
                plans[pol] = optimize_plan(dep, params, pol)
    except (CalibrationError, PlanError, mac.UnsupportedScenarioError) as exc:
        out.error = f"{type(exc).__name__}: {exc}"
        log.error("seed %d: %s", seed, out.error)
        return out

    out.manifest = {
        "seed": seed,
        "deployment": dep.to_dict(),
        "calibration": {**asdict(cal), "seed": cal_seed},
        "plans": {p: {"digest": pl.digest(), "groups": pl.to_lines(), "objective": pl.objective}
                  for p, pl in plans.items() if pl is not None},
        "runs": [],
    }
    for model in spec.traffic_models:
        traffic_seed = derive_seed(seed, _TRAFFIC, _MODEL_TAG[model])
        engine_seed = derive_seed(seed, _ENGINE, _MODEL_TAG[model])
        traffic = None if model == "saturated" else TrafficSpec.from_params(model, cal.rate, params)
        for pol in spec.policies:
            res = mac.simulate(dep, params, traffic, engine_seed, plan=plans[pol],
                               traffic_seed=traffic_seed, log=spec.event_logs, **engine)
            stas, net = summarize_result(res)
            key = {"seed": seed, "d_ap_ap": params.inter_ap_distance, "policy": pol,
                   "traffic": model, "load_pps": cal.rate}
            out.sta_rows.extend(sta_rows(key, stas))
            out.network_rows.append({**key, **asdict(net)})
            run = {"policy": pol, "traffic": model, "traffic_seed": traffic_seed,
                   "engine_seed": engine_seed}
            if spec.event_logs and spec.output_dir is not None:
                name = f"seed{seed}_{pol}_{model}.jsonl"
                logdir = Path(spec.output_dir) / "logs"
                logdir.mkdir(parents=True, exist_ok=True)
                res.write_event_log(logdir / name, dep, plans[pol])
                run["event_log"] = f"logs/{name}"
            out.manifest["runs"].append(run)
            log.info("seed %d %s %s: p99 %s ms", seed, pol, model, net.delay_p99)
    return out


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    outcomes: list[DeploymentOutcome]

    @property
    def failures(self) -> list[DeploymentOutcome]:
        return [o for o in self.outcomes if o.error]

    def network_rows(self) -> list[dict]:
        return [r for o in self.outcomes for r in o.network_rows]

    def sta_rows(self) -> list[dict]:
        return [r for o in self.outcomes for r in o.sta_rows]

    def manifest(self) -> dict[str, Any]:
        s = self.spec
        return {
            "params": s.params.to_dict(),
            "policies": list(s.policies),
            "traffic_models": list(s.traffic_models),
            "seeds": list(s.seeds),
            "deployment": s.deployment,
            "load_fraction": s.load_fraction,
            "engine": s.engine_options(),
            "seed_scheme": "SeedSequence([seed, stream, model]): stream 1 calibration, "
                           "2 traffic, 3 engine; shared by all policies",
            "deployments": [o.manifest for o in self.outcomes if not o.error],
            "failures": [{"seed": o.seed, "error": o.error} for o in self.failures],
        }


KEY_COLUMNS = ["seed", "d_ap_ap", "policy", "traffic", "load_pps"]


def _job(args):
    spec, seed = args
    return run_deployment(spec, seed)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every cell, then write per-run CSV, aggregate CSV and manifest (if output_dir set)."""
    if spec.output_dir is not None:
        out = Path(spec.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
    jobs = [(spec, s) for s in spec.seeds]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = [_job(j) for j in jobs]
    result = ExperimentResult(spec, outcomes)
    if spec.output_dir is not None:
        write_outputs(result, Path(spec.output_dir))
    return result


def write_outputs(result: ExperimentResult, out: Path) -> None:
    write_rows(out / "runs.csv", result.sta_rows(), KEY_COLUMNS + STA_COLUMNS)
    write_rows(out / "aggregate.csv", aggregate_rows(result.network_rows()),
               KEY_COLUMNS + NETWORK_COLUMNS + ["p99_reduction_vs_dcf", "p50_reduction_vs_dcf",
                                                "throughput_gain_vs_dcf"])
    with open(out / "manifest.json", "w") as fh:
        json.dump(result.manifest(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def aggregate_rows(network_rows: Sequence[dict]) -> list[dict]:
    """Network rows annotated with the paired comparison against DCF."""
    dcf = {(r["seed"], r["traffic"]): r for r in network_rows if r["policy"] == "DCF"}
    rows = []
    for r in network_rows:
        row = dict(r)
        base = dcf.get((r["seed"], r["traffic"]))
        if base is not None:
            for q in ("p99", "p50"):
                a, b = r[f"delay_{q}"], base[f"delay_{q}"]
                row[f"{q}_reduction_vs_dcf"] = 1 - a / b if a is not None and b else None
            row["throughput_gain_vs_dcf"] = r["throughput"] / base["throughput"] - 1
        rows.append(row)
    return rows


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))
