#!/usr/bin/env python3
"""Per-step worst-case error without an attacker for four detectors (log10 scale)."""
import argparse

import numpy as np

from byzdetect import reproduce

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--trials", type=int, default=100_000)
ap.add_argument("--horizon", type=int, default=40)
args = ap.parse_args()

curves = reproduce.fig4(trials=args.trials, horizon=args.horizon)
names = list(curves)
print("k," + ",".join(f"log10_{n}" for n in names))
for i, k in enumerate(curves[names[0]].k):
    print(f"{k}," + ",".join(f"{curves[n].log_worst[i] / np.log(10):.4f}" for n in names))
for n, est in curves.items():
    print(f"# {n}: fitted exponent {est.fitted_exponent:.3f}")
