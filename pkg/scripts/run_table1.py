#!/usr/bin/env python3
"""Security/efficiency exponents of the three detectors on the reference network."""
import argparse
import json

from byzdetect import reproduce


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = reproduce.table1(trials=args.trials, horizon=args.horizon, seed=args.seed)
    print(f"{'detector':<9}{'metric':<12}{'reference':>10}{'measured':>10}  ok")
    for r in res["rows"]:
        print(f"{r['detector']:<9}{r['metric']:<12}{r['reference']:>10.2f}{r['measured']:>10.3f}  {r['within_tolerance']}")
    print(f"q-out-of-m efficiency from exact binomial sums: {res['qom_efficiency_exact']:.3f}")
    print(json.dumps({"efficiency_ordering": res["efficiency_ordering"],
                      "security_ordering": res["security_ordering"]}))


if __name__ == "__main__":
    main()
