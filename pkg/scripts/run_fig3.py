#!/usr/bin/env python3
"""Simulated (security, efficiency) pairs of the secure detector against the h_e curve."""
import argparse
import csv
import sys

from byzdetect import reproduce

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--points", type=int, default=9)
ap.add_argument("--trials", type=int, default=20_000)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

rows = reproduce.fig3(points=args.points, trials=args.trials, seed=args.seed)
w = csv.DictWriter(sys.stdout, list(rows[0]))
w.writeheader()
w.writerows(rows)
