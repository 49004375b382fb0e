"""Command-line front end.

    cosrsim run       run a batch and write CSVs plus a manifest
    cosrsim verify    re-check the event logs of a finished batch
    cosrsim calibrate print the calibrated per-STA load of deployments
    cosrsim plan      print the grouping plan of a deployment

Settings come from an optional YAML/JSON config file (``--config``); command
line flags override the file, which overrides the built-in defaults. The
output root defaults to ``./results`` and can be moved with the
``COSRSIM_OUTPUT_ROOT`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import verify as checks
from .experiment import (OUTPUT_ENV, ExperimentSpec, default_output_root, derive_seed,
                         make_deployment, parse_seeds, run_experiment, spec_from_config,
                         _CAL)
from .grouping import PlanError, optimize_plan
from .mac import UnsupportedScenarioError
from .params import ConfigError
from .traffic import CalibrationError, calibrate_load

log = logging.getLogger("cosrsim")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def build_spec(args) -> ExperimentSpec:
    cfg = load_config(getattr(args, "config", None))
    params_cfg = dict(cfg.get("params") or {})
    if args.d_ap_ap is not None:
        params_cfg["inter_ap_distance"] = args.d_ap_ap
    for kv in args.set or []:
        k, _, v = kv.partition("=")
        params_cfg[k] = yaml.safe_load(v)
    cfg["params"] = params_cfg
    if getattr(args, "seeds", None) is not None:
        cfg["seeds"] = args.seeds
    if getattr(args, "policies", None):
        cfg["policies"] = args.policies.split(",")
    if getattr(args, "traffic", None):
        cfg["traffic"] = args.traffic.split(",")
    if getattr(args, "symmetric", False):
        cfg["deployment"] = "symmetric"
    if getattr(args, "workers", None) is not None:
        cfg["workers"] = args.workers
    if getattr(args, "event_logs", False):
        cfg["event_logs"] = True
    spec = spec_from_config(cfg)
    return spec


def _seeds_arg(text: str):
    return int(text) if text.isdigit() else parse_seeds(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON experiment file")
    p.add_argument("--d-ap-ap", type=float, dest="d_ap_ap", help="inter-AP distance in meters")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any simulation parameter (repeatable)")
    p.add_argument("--seeds", type=_seeds_arg,
                   help="deployment seeds: a count N (0..N-1), a range a-b or a list a,b,c")
    p.add_argument("--symmetric", action="store_true", help="use the symmetric example deployment")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cosrsim", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch of simulations")
    _common(run)
    run.add_argument("--policies", help="comma list from DCF,MAX2,UNC")
    run.add_argument("--traffic", help="comma list from poisson,bursty,saturated")
    run.add_argument("--workers", type=int, help="parallel worker processes")
    run.add_argument("--name", default="batch", help="batch directory under the output root")
    run.add_argument("--out", help=f"explicit output directory (else ${OUTPUT_ENV}/NAME)")
    run.add_argument("--event-logs", action="store_true", dest="event_logs",
                     help="export per-run event logs for 'verify'")

    ver = sub.add_parser("verify", help="check the event logs of a batch")
    ver.add_argument("batch", help="batch directory (containing logs/)")

    cal = sub.add_parser("calibrate", help="print the calibrated load per deployment")
    _common(cal)

    pl = sub.add_parser("plan", help="print grouping plans")
    _common(pl)
    pl.add_argument("--policies", default="MAX2,UNC", help="comma list from MAX2,UNC")
    return ap


def cmd_run(args) -> int:
    spec = build_spec(args)
    out = Path(args.out) if args.out else (spec.output_dir or default_output_root() / args.name)
    spec = replace(spec, output_dir=out)
    log.info("running %d deployments x %d policies x %d traffic models -> %s",
             len(spec.seeds), len(spec.policies), len(spec.traffic_models), out)
    result = run_experiment(spec)
    print(f"wrote {out / 'runs.csv'}, {out / 'aggregate.csv'}, {out / 'manifest.json'}")
    for f in result.failures:
        print(f"seed {f.seed}: {f.error}", file=sys.stderr)
    return 1 if result.failures else 0


def cmd_verify(args) -> int:
    batch = Path(args.batch)
    logs = sorted((batch / "logs").glob("*.jsonl"))
    if not logs:
        print(f"no event logs under {batch / 'logs'} (run with --event-logs)", file=sys.stderr)
        return 2
    failed = 0
    for path in logs:
        results = checks.run_checks(checks.read_event_log(path))
        bad = [r for r in results if not r.ok]
        failed += bool(bad)
        status = "PASS" if not bad else "FAIL"
        print(f"{status} {path.name}" + "".join(f"\n    {r.name}: {r.detail}" for r in bad))
    print(f"{len(logs) - failed}/{len(logs)} runs passed")
    return 1 if failed else 0


def cmd_calibrate(args) -> int:
    spec = build_spec(args)
    status = 0
    for seed in spec.seeds:
        dep = make_deployment(spec, seed)
        try:
            cal = calibrate_load(dep, spec.params, derive_seed(seed, _CAL), spec.load_fraction)
        except (CalibrationError, UnsupportedScenarioError) as exc:
            print(f"seed {seed}: {exc}", file=sys.stderr)
            status = 1
            continue
        print(f"seed {seed}: {cal.rate:.1f} packets/s per STA "
              f"({cal.rate * spec.params.frame_length_bits / 1e6:.2f} Mbit/s), "
              f"reference STA {cal.reference_sta} at MCS {cal.reference_mcs}")
    return status


def cmd_plan(args) -> int:
    spec = build_spec(args)
    status = 0
    for seed in spec.seeds:
        dep = make_deployment(spec, seed)
        for pol in args.policies.split(","):
            try:
                plan = optimize_plan(dep, spec.params, pol)
            except PlanError as exc:
                print(f"seed {seed} {pol}: {exc}", file=sys.stderr)
                status = 1
                continue
            print(f"seed {seed} {pol} objective={plan.objective:.4f} digest={plan.digest()[:12]}")
            for line in plan.to_lines():
                print("  " + line)
    return status


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "verify": cmd_verify, "calibrate": cmd_calibrate, "plan": cmd_plan}
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
