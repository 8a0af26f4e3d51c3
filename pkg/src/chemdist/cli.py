"""Command-line front end.

Exit status: 0 success, 1 degenerate statistics (or a failed manifest check),
2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .arms import EstimateRecord
from .crossings import crossing_record
from .montecarlo import DegenerateEstimates, ExperimentSpec, run_experiment
from .sampling import InsufficientConditioning, config_for, pmap

CSV_HEADER = ("experiment", "n", "samples", "attempts", "mean", "se", "ci_lo", "ci_hi")

COMMAND_KIND = {
    "ratio": "ratio",
    "pi3": "pi3-scaling",
    "volume": "lowest-volume",
    "shortcuts": "shortcut-audit",
    "circuits": "circuit-stack",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# persistence


def fmt(x: float) -> str:
    return "%#.6g" % x


def write_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_bytes(records) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.name, r.n, r.samples, r.attempts if r.attempts is not None else r.samples,
                    fmt(r.mean), fmt(r.se), fmt(r.ci_lo), fmt(r.ci_hi)])
    return buf.getvalue().encode()


def read_csv(path) -> list[EstimateRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    return [EstimateRecord(r[0], int(r[1]), int(r[2]), float(r[4]), float(r[5]), float(r[6]),
                           float(r[7]), int(r[3])) for r in rows[1:]]


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def emit_outputs(records, spec: dict, csv_path, extra: dict | None = None) -> Path:
    """Write the CSV table and its JSON manifest next to it; returns the manifest path."""
    csv_path = Path(csv_path)
    started = (extra or {}).pop("started", None)
    write_atomic(csv_path, csv_bytes(records))
    manifest = {
        "tool": "chemdist",
        "version": __version__,
        "spec": spec,
        "seed": spec.get("seed"),
        "started": started,
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
        "records": [r.__dict__ for r in records],
        "outputs": {csv_path.name: sha256(csv_path)},
    }
    manifest.update(extra or {})
    mpath = csv_path.with_suffix(".json")
    write_atomic(mpath, (json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n").encode())
    return mpath


# ---------------------------------------------------------------------------
# argument parsing


def _n_list(text: str) -> tuple[int, ...]:
    try:
        ns = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {text!r}") from None
    if not ns or any(n < 1 for n in ns):
        raise argparse.ArgumentTypeError(f"box sizes must be positive, got {text!r}")
    if any(a >= b for a, b in zip(ns[:-1], ns[1:])):
        raise argparse.ArgumentTypeError(f"box sizes must be strictly increasing, got {text!r}")
    return ns


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemdist",
                                 description="Chemical distance vs lowest crossing experiments")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, samples=1000):
        p.add_argument("--n", type=_n_list, required=True, help="comma list of box half-sides")
        p.add_argument("--samples", type=_positive_int, default=samples)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--p", type=_probability, default=0.5)
        p.add_argument("--workers", type=_positive_int, default=None,
                       help="worker processes (default: $PERC_WORKERS or 1)")
        p.add_argument("--out", type=Path, default=None, help="CSV path; manifest goes next to it")

    p = sub.add_parser("sample", help="draw configurations and summarise them")
    common(p, samples=1)
    p.add_argument("--index", type=int, default=0)
    p = sub.add_parser("crossing", help="crossing probability P(H_n)")
    common(p)
    for name, kind in COMMAND_KIND.items():
        p = sub.add_parser(name, help=f"{kind} campaign")
        common(p)
        p.add_argument("--kappa", type=_positive_float, default=0.5)
        p.add_argument("--epsilon", type=_positive_float, default=0.125)
        p.add_argument("--exhaustive", action="store_true", help="exact enumeration of B(1)")
        p.add_argument("--max-attempts", type=_positive_int, default=None)
        if name == "pi3":
            p.add_argument("--conditional", action="store_true",
                           help="centre edge on l_n given H_n, next to pi3")
        if name == "circuits":
            p.add_argument("--N", type=_positive_int, default=1)
    p = sub.add_parser("report", help="summarise and verify a run manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--rerun", action="store_true", help="re-run the spec and compare digests")
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--out", type=Path, default=None, help="CSV path for the re-run")
    return ap


# ---------------------------------------------------------------------------
# commands


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def _spec_from_args(args) -> ExperimentSpec:
    kind = COMMAND_KIND[args.command]
    if args.command == "pi3" and args.conditional:
        kind = "conditional-3arm"
    return ExperimentSpec(kind, args.n, args.samples, args.seed, args.p, args.kappa,
                          args.epsilon, getattr(args, "N", 1), args.exhaustive, args.max_attempts,
                          str(args.out) if args.out else None)


def run_spec(spec: ExperimentSpec, out: Path, workers=None) -> tuple[int, Path]:
    started = _now()
    res = run_experiment(spec, workers)
    extra = {"started": started, "command": spec.kind, "wall_time": res.wall_time,
             "fits": {k: f.to_dict() for k, f in res.fits.items()},
             "refusals": res.refusals, "extras": res.extras}
    mpath = emit_outputs(res.records, spec.to_dict(), out, extra)
    for r in res.records:
        print(f"{r.name:>14s} n={r.n:<5d} mean={fmt(r.mean)} se={fmt(r.se)}")
    for k, f in res.fits.items():
        print(f"fit {k}: slope {f.slope:.4f} +- {f.slope_se:.4f}  CI [{f.ci[0]:.4f}, {f.ci[1]:.4f}]")
    if res.refusals:
        print("degenerate estimates: " + "; ".join(res.refusals), file=sys.stderr)
        return 1, mpath
    return 0, mpath


def _cmd_experiment(args) -> int:
    try:
        spec = _spec_from_args(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = args.out or Path("results") / f"{spec.kind}.csv"
    try:
        status, _ = run_spec(spec, out, args.workers)
    except (DegenerateEstimates, InsufficientConditioning) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return status


def _crossing_indicator(cfg):
    return float(crossing_record(cfg).H_n)


def _cmd_crossing(args) -> int:
    started = _now()
    recs = [EstimateRecord.from_values("P_H", n, pmap(_crossing_indicator, n, range(args.samples),
                                                         args.seed, args.p, args.workers))
            for n in args.n]
    spec = {"kind": "crossing", "ns": list(args.n), "samples": args.samples, "seed": args.seed,
            "p": args.p}
    out = args.out or Path("results") / "crossing.csv"
    emit_outputs(recs, spec, out, {"started": started, "command": "crossing"})
    for r in recs:
        print(f"P_H n={r.n}: {fmt(r.mean)} +- {fmt(r.se)}")
    return 0


def _cmd_sample(args) -> int:
    out = []
    for n in args.n:
        for i in range(args.index, args.index + args.samples):
            cfg = config_for(n, i, args.seed, args.p)
            rec = crossing_record(cfg)
            out.append({"n": n, "index": i, "open_fraction": cfg.open_fraction(),
                        "H_n": rec.H_n, "S_n": rec.S_n, "L_n": rec.L_n,
                        "states": "".join(map(str, cfg.states.tolist()))})
            print(f"n={n} index={i} open={cfg.open_fraction():.4f} H={int(rec.H_n)} "
                  f"S={rec.S_n} L={rec.L_n}")
    if args.out:
        write_atomic(args.out, (json.dumps({"seed": args.seed, "p": args.p, "samples": out},
                                           indent=1) + "\n").encode())
    return 0


def _cmd_report(args) -> int:
    try:
        man = json.loads(Path(args.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--manifest: cannot read {args.manifest}: {exc}") from None
    base = Path(args.manifest).parent
    ok = True
    for name, digest in man.get("outputs", {}).items():
        path = base / name
        got = sha256(path) if path.exists() else None
        status = "ok" if got == digest else "MISMATCH"
        ok &= got == digest
        print(f"{name}: {status}")
        if path.exists() and name.endswith(".csv"):
            for r in read_csv(path):
                print(f"  {r.name:>14s} n={r.n:<5d} mean={fmt(r.mean)} "
                      f"CI [{fmt(r.ci_lo)}, {fmt(r.ci_hi)}]")
    for k, f in (man.get("fits") or {}).items():
        print(f"fit {k}: slope {f['slope']:.4f}  CI [{f['ci'][0]:.4f}, {f['ci'][1]:.4f}]")
    if args.rerun:
        spec_d = dict(man["spec"])
        if spec_d.get("kind") not in COMMAND_KIND.values():
            raise UsageError("--rerun supports experiment manifests only")
        spec = ExperimentSpec.from_dict(spec_d)
        out = args.out or base / "rerun" / Path(list(man["outputs"])[0]).name
        try:
            run_spec(spec, out, args.workers)
        except (DegenerateEstimates, InsufficientConditioning) as exc:
            print(str(exc), file=sys.stderr)
            return 1
        old = list(man["outputs"].values())[0]
        same = sha256(out) == old
        print(f"rerun {out}: {'identical' if same else 'DIFFERENT'}")
        ok &= same
    return 0 if ok else 1


def parse_and_dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code) if isinstance(exc.code, int) else 2
    try:
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "crossing":
            return _cmd_crossing(args)
        return _cmd_experiment(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"chemdist: error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
