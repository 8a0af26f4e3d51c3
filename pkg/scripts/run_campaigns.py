#!/usr/bin/env python3
"""Run the standard campaigns and write one CSV + JSON manifest per campaign.

    python scripts/run_campaigns.py --out-dir results            # full size
    python scripts/run_campaigns.py --out-dir results --quick    # smoke run

Any manifest can be checked later with ``chemdist report --manifest X.json --rerun``.
"""
import argparse
import sys
from pathlib import Path

from chemdist.cli import run_spec
from chemdist.montecarlo import ExperimentSpec

FULL = [
    ExperimentSpec("ratio", (8, 16, 32, 64, 128), 2000, 20240611),
    ExperimentSpec("lowest-volume", (8, 16, 32, 64), 4000, 20240611),
    ExperimentSpec("pi3-scaling", (4, 8, 16, 32, 64, 128), 10000, 20240611),
    ExperimentSpec("conditional-3arm", (8, 16, 32), 4000, 20240611),
    ExperimentSpec("shortcut-audit", (32,), 200, 20240611),
]


def quick(spec: ExperimentSpec) -> ExperimentSpec:
    ns = tuple(n for n in spec.ns if n <= 32) or spec.ns[:1]
    return ExperimentSpec(spec.kind, ns, min(spec.samples, 100), spec.seed, spec.p, spec.kappa,
                          spec.epsilon, spec.N)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--quick", action="store_true", help="small n and 100 samples")
    ap.add_argument("--only", nargs="*", help="restrict to these experiment kinds")
    args = ap.parse_args()
    status = 0
    for spec in FULL:
        if args.only and spec.kind not in args.only:
            continue
        if args.quick:
            spec = quick(spec)
        print(f"== {spec.kind} n={list(spec.ns)} samples={spec.samples}", flush=True)
        code, manifest = run_spec(spec, args.out_dir / f"{spec.kind}.csv", args.workers)
        print(f"   manifest {manifest} (exit {code})")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
