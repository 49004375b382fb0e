"""The symmetric four-BSS example: UNC groups, throughput and delay gains."""
import argparse

from cosrsim.experiment import ExperimentSpec, run_experiment
from cosrsim.grouping import optimize_plan
from cosrsim.params import make_params, symmetric_example


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d-ap-ap", type=float, default=15.0)
    ap.add_argument("--out", default=None, help="optional directory for CSVs and manifest")
    args = ap.parse_args()

    params = make_params({"d_AP-AP": args.d_ap_ap})
    dep = symmetric_example(params)
    for pol in ("MAX2", "UNC"):
        plan = optimize_plan(dep, params, pol)
        print(f"{pol}: {[list(g.stas) for g in plan.groups]}")

    spec = ExperimentSpec(params=params, deployment="symmetric", seeds=(0,),
                          traffic_models=("saturated", "poisson", "bursty"), output_dir=args.out)
    rows = {(r["traffic"], r["policy"]): r for r in run_experiment(spec).network_rows()}
    thr = {p: rows[("saturated", p)]["throughput"] for p in ("DCF", "MAX2", "UNC")}
    print("saturated throughput (Mbit/s): "
          + ", ".join(f"{p} {t / 1e6:.0f}" for p, t in thr.items()))
    print(f"UNC gain vs DCF {thr['UNC'] / thr['DCF'] - 1:.0%}, vs MAX2 {thr['UNC'] / thr['MAX2'] - 1:.0%}")
    for model in ("poisson", "bursty"):
        d = {p: rows[(model, p)]["delay_p99"] for p in ("DCF", "MAX2", "UNC")}
        print(f"{model}: p99 DCF {d['DCF']:.2f} MAX2 {d['MAX2']:.2f} UNC {d['UNC']:.2f} ms, "
              f"UNC reduction {1 - d['UNC'] / d['DCF']:.0%}")


if __name__ == "__main__":
    main()
