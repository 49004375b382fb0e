"""Distribution of group sizes chosen by the optimizer across distances."""
import argparse
from collections import Counter

from cosrsim.grouping import optimize_plan
from cosrsim.params import generate_deployment, make_params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--d-ap-ap", type=float, nargs="+", default=[10.0, 15.0, 20.0, 30.0])
    args = ap.parse_args()
    for d in args.d_ap_ap:
        params = make_params({"d_AP-AP": d})
        for pol in ("MAX2", "UNC"):
            sizes = Counter()
            for seed in range(args.seeds):
                plan = optimize_plan(generate_deployment(params, seed), params, pol)
                sizes.update(g.size for g in plan.groups)
            total = sum(sizes.values())
            hist = "  ".join(f"{k}:{v / total:5.1%}" for k, v in sorted(sizes.items()))
            print(f"d={d:4g} {pol:4s} {hist}")


if __name__ == "__main__":
    main()
