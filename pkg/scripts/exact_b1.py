#!/usr/bin/env python3
"""Exact B(1) quantities by enumerating all 2^12 configurations."""
import argparse

from chemdist.montecarlo import exact_n1

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--p", type=float, default=0.5)
args = ap.parse_args()
for key, value in exact_n1("ratio", args.p).items():
    print(f"{key:>5s} = {value}  ({float(value):.6f})")
