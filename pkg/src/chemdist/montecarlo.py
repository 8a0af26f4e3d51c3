"""Experiment harness: conditioned campaigns, exact n=1 enumeration and log-log fits.

Every campaign draws sample i at size n from ``derive_seed(master, n, i)``
(see :mod:`chemdist.sampling`), so tables depend only on the spec, never on
the worker count.  Independent sub-campaigns (for instance pi3 next to the
crossing lengths) use their own master seeds derived from the spec seed.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import partial

import numpy as np

from .arms import (EstimateRecord, detect_a3, detect_circuit_stack, estimate_pi3,
                   measure_conditional_frequency)
from .crossings import (has_horizontal_crossing, lowest_crossing, shortest_crossing)
from .lattice import all_configs, derive_seed, make_box
from .sampling import conditioned_samples
from .shortcuts import (build_sigma, find_all_shortcuts, revalidate, select_maximal,
                        verify_nested_or_disjoint, weighted_interval_scheduling)

KINDS = ("ratio", "pi3-scaling", "lowest-volume", "conditional-3arm", "circuit-stack",
         "shortcut-audit")
Z95 = 1.96

# sub-stream tags for independent estimates inside one campaign
_PI3_STREAM = 3
_CIRCUIT_STREAM = 9


class DegenerateEstimates(ValueError):
    """Estimates carry no statistical content (zero, non-positive or zero-variance)."""


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    ns: tuple[int, ...]
    samples: int
    seed: int
    p: float = 0.5
    kappa: float = 0.5
    epsilon: float = 0.125
    N: int = 1
    exhaustive: bool = False
    max_attempts: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        ns = tuple(int(n) for n in self.ns)
        object.__setattr__(self, "ns", ns)
        if not ns or any(n < 1 for n in ns):
            raise ValueError("--n values must be positive")
        if any(a >= b for a, b in zip(ns[:-1], ns[1:])):
            raise ValueError("--n values must be strictly increasing")
        if self.samples < 1:
            raise ValueError("--samples must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("--p must lie in [0, 1]")
        if self.kappa <= 0 or self.epsilon <= 0:
            raise ValueError("--kappa and --epsilon must be positive")
        if self.exhaustive and ns != (1,):
            raise ValueError("exhaustive mode enumerates B(1) only")

    @property
    def ci_valid(self) -> bool:
        return self.exhaustive or self.samples >= 30

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ns"] = list(self.ns)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["ns"] = tuple(d["ns"])
        return cls(**d)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_se: float
    ci: tuple[float, float]
    residuals: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "slope_se": self.slope_se,
                "ci": list(self.ci), "residuals": list(self.residuals)}


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list[EstimateRecord] = field(default_factory=list)
    fits: dict[str, FitResult] = field(default_factory=dict)
    refusals: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def table(self, name: str) -> list[EstimateRecord]:
        return [r for r in self.records if r.name == name]

    def require_nondegenerate(self) -> None:
        if self.refusals:
            raise DegenerateEstimates("degenerate estimates: " + "; ".join(self.refusals))


# ---------------------------------------------------------------------------
# statistics


def fit_power_law(points) -> FitResult:
    """Least squares of log(estimate) on log(n).

    With every SE positive the fit is weighted by 1/(SE/estimate)^2 and the
    slope SE propagates those errors; otherwise it is ordinary least squares
    with the residual-based SE.
    """
    pts = [(float(n), float(y), float(s)) for n, y, s in points]
    if len(pts) < 3:
        raise ValueError("a power-law fit needs at least 3 points")
    if any(not (y > 0) or not math.isfinite(y) for _, y, _ in pts):
        raise DegenerateEstimates("degenerate estimates: non-positive value in power-law fit")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    sig = np.array([p[2] / p[1] for p in pts])
    X = np.column_stack([np.ones_like(x), x])
    if np.all(sig > 0) and np.all(np.isfinite(sig)):
        w = 1.0 / sig ** 2
        A = X.T @ (X * w[:, None])
        coef = np.linalg.solve(A, X.T @ (w * y))
        cov = np.linalg.inv(A)
    else:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        res = y - X @ coef
        dof = len(pts) - 2
        s2 = float(res @ res) / dof if dof > 0 else 0.0
        cov = s2 * np.linalg.inv(X.T @ X)
    b, a = float(coef[1]), float(coef[0])
    se = float(math.sqrt(max(cov[1, 1], 0.0)))
    if se < 1e-12 * max(1.0, abs(b)):
        se = 0.0
    resid = tuple(float(r) for r in (y - X @ coef))
    return FitResult(b, a, se, (b - Z95 * se, b + Z95 * se), resid)


def ratio_of_means(x, y) -> tuple[float, float]:
    """mean(x)/mean(y) for paired samples with its delta-method SE."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.size
    mx, my = x.mean(), y.mean()
    r = mx / my
    if m < 2:
        return float(r), float("nan")
    c = np.cov(x, y, ddof=1)
    var = (c[0, 0] / my ** 2 - 2 * mx * c[0, 1] / my ** 3 + mx ** 2 * c[1, 1] / my ** 4) / m
    return float(r), float(math.sqrt(max(var, 0.0)))


def _record(name, n, mean, se, samples, attempts) -> EstimateRecord:
    return EstimateRecord(name, int(n), int(samples), float(mean), float(se),
                          float(mean - Z95 * se), float(mean + Z95 * se), int(attempts))


def _quotient(name, a: EstimateRecord, b: EstimateRecord, scale: float = 1.0) -> EstimateRecord:
    """a / (scale * b) for independent estimates."""
    if b.mean == 0:
        raise DegenerateEstimates(f"degenerate estimates: {b.name} is zero at n={b.n}")
    q = a.mean / (scale * b.mean)
    rel = math.hypot(a.se / a.mean if a.mean else 0.0, b.se / b.mean)
    return _record(name, a.n, q, abs(q) * rel, min(a.samples, b.samples),
                   max(a.attempts or 0, b.attempts or 0))


def _try_fit(result: ExperimentResult, name: str, recs) -> None:
    if len(recs) < 3:
        return
    if any(r.se == 0 for r in recs) and not result.spec.exhaustive:
        result.refusals.append(f"{name}: zero-variance estimates")
        return
    try:
        result.fits[name] = fit_power_law([(r.n, r.mean, r.se) for r in recs])
    except DegenerateEstimates as exc:
        result.refusals.append(f"{name}: {exc}")


def _flag_zero_variance(result: ExperimentResult, recs) -> None:
    if result.spec.exhaustive:
        return
    for r in recs:
        if r.samples > 1 and r.se == 0:
            result.refusals.append(f"{r.name} at n={r.n}: zero-variance estimate")


# ---------------------------------------------------------------------------
# per-sample work (top level so worker processes can import it)


def crossing_sample(kappa, cfg):
    """(S_n, L_n, #sigma) of a configuration with a horizontal crossing."""
    low = lowest_crossing(cfg)
    S = shortest_crossing(cfg).length
    if kappa is None:
        return S, low.length, low.length
    fam = find_all_shortcuts(cfg, low, kappa)
    sigma = build_sigma(low, select_maximal(fam, low))
    return S, low.length, sigma.length


def _order_violations(n, rows) -> int:
    return sum(1 for S, L, sig in rows if not (2 * n <= S <= L and sig <= L))


def _conditioned(spec: ExperimentSpec, fn, n, workers):
    return conditioned_samples(fn, has_horizontal_crossing, n, spec.samples, spec.seed, spec.p,
                               workers, spec.max_attempts)


# ---------------------------------------------------------------------------
# exact enumeration of B(1)


def _weights(p, g):
    p = Fraction(p).limit_denominator(10 ** 9)
    E = g.num_edges
    for cfg in all_configs(g):
        k = int(cfg.states.sum())
        yield cfg, p ** k * (1 - p) ** (E - k)


def exact_n1(kind: str, p: float = 0.5) -> dict[str, Fraction]:
    """Exact B(1) quantities: P(H), E[S|H], E[L|H], pi3(1)."""
    g = make_box(1)
    PH = ES = EL = P3 = Fraction(0)
    for cfg, w in _weights(p, g):
        if detect_a3(cfg, 1):
            P3 += w
        if has_horizontal_crossing(cfg):
            PH += w
            ES += w * shortest_crossing(cfg).length
            EL += w * lowest_crossing(cfg).length
    out = {"P_H": PH, "pi3": P3}
    if PH > 0:
        out["S_n"] = ES / PH
        out["L_n"] = EL / PH
    return out


def _exact_record(name, value: Fraction) -> EstimateRecord:
    return _record(name, 1, float(value), 0.0, 4096, 4096)


# ---------------------------------------------------------------------------
# campaigns


def run_ratio_experiment(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    """E[S_n|H_n], E[L_n|H_n] and their ratio per n, with log-log fits."""
    t0 = time.perf_counter()
    res = ExperimentResult(spec)
    if spec.exhaustive:
        ex = exact_n1("ratio", spec.p)
        if "S_n" not in ex:
            raise DegenerateEstimates("degenerate estimates: H_1 has probability zero")
        res.records += [_exact_record("S_n", ex["S_n"]), _exact_record("L_n", ex["L_n"]),
                        _exact_record("S_over_L", ex["S_n"] / ex["L_n"])]
        res.wall_time = time.perf_counter() - t0
        return res
    violations = 0
    for n in spec.ns:
        rows, att = _conditioned(spec, partial(crossing_sample, spec.kappa), n, workers)
        S = [r[0] for r in rows]
        L = [r[1] for r in rows]
        violations += _order_violations(n, rows)
        rS = EstimateRecord.from_values("S_n", n, S, att)
        rL = EstimateRecord.from_values("L_n", n, L, att)
        q, se = ratio_of_means(S, L)
        res.records += [rS, rL, _record("S_over_L", n, q, se, len(rows), att),
                        EstimateRecord.from_values("sigma_n", n, [r[2] for r in rows], att)]
    res.extras["order_violations"] = violations
    for name in ("S_n", "L_n"):
        _flag_zero_variance(res, res.table(name))
    if not res.refusals:
        for name in ("S_n", "L_n", "S_over_L"):
            _try_fit(res, name, res.table(name))
    res.wall_time = time.perf_counter() - t0
    return res


def _pi3_records(spec: ExperimentSpec, ns, workers) -> list[EstimateRecord]:
    seed = derive_seed(spec.seed, _PI3_STREAM)
    return [estimate_pi3(n, spec.samples, seed, spec.p, workers) for n in ns]


def run_pi3_scaling(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    """pi3(n) over the n list, a log-log fit and the doubling ratios pi3(2n)/pi3(n)."""
    t0 = time.perf_counter()
    res = ExperimentResult(spec)
    if spec.exhaustive:
        res.records.append(_exact_record("pi3", exact_n1("pi3", spec.p)["pi3"]))
        res.wall_time = time.perf_counter() - t0
        return res
    recs = _pi3_records(spec, spec.ns, workers)
    res.records += recs
    by_n = {r.n: r for r in recs}
    for n in spec.ns:
        if 2 * n in by_n:
            try:
                # labelled by the base scale n
                q = _quotient("pi3_doubling", by_n[2 * n], by_n[n])
                res.records.append(replace(q, n=n))
            except DegenerateEstimates as exc:
                res.refusals.append(str(exc))
    if all(r.mean == 0 for r in recs):
        res.refusals.append("pi3: degenerate estimates (all zero)")
    else:
        _try_fit(res, "pi3", recs)
    res.wall_time = time.perf_counter() - t0
    return res


def run_lowest_volume(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    """E[L_n|H_n] and the normalised E[L_n|H_n] / (n^2 pi3(n))."""
    t0 = time.perf_counter()
    res = ExperimentResult(spec)
    if spec.exhaustive:
        ex = exact_n1("lowest-volume", spec.p)
        if "L_n" not in ex or ex["pi3"] == 0:
            raise DegenerateEstimates("degenerate estimates at n=1")
        res.records += [_exact_record("L_n", ex["L_n"]), _exact_record("pi3", ex["pi3"]),
                        _exact_record("L_over_n2pi3", ex["L_n"] / ex["pi3"])]
        res.wall_time = time.perf_counter() - t0
        return res
    violations = 0
    Ls = []
    for n in spec.ns:
        rows, att = _conditioned(spec, partial(crossing_sample, None), n, workers)
        violations += _order_violations(n, rows)
        Ls.append(EstimateRecord.from_values("L_n", n, [r[1] for r in rows], att))
    pis = _pi3_records(spec, spec.ns, workers)
    res.records += Ls + pis
    for L, P in zip(Ls, pis):
        try:
            res.records.append(_quotient("L_over_n2pi3", L, P, float(L.n) ** 2))
        except DegenerateEstimates as exc:
            res.refusals.append(str(exc))
    res.extras["order_violations"] = violations
    _try_fit(res, "L_n", Ls)
    res.wall_time = time.perf_counter() - t0
    return res


def _center_edge_on_lowest(cfg) -> bool:
    g = cfg.geometry
    e = g.edge_between((0, 0), (1, 0)) if g.n >= 1 else 0
    return e in lowest_crossing(cfg).edges


def run_conditional_3arm(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    """P(centre edge on l_n | H_n) next to pi3(n)."""
    t0 = time.perf_counter()
    res = ExperimentResult(spec)
    pis = _pi3_records(spec, spec.ns, workers)
    for n, P in zip(spec.ns, pis):
        c = measure_conditional_frequency(_center_edge_on_lowest, has_horizontal_crossing, n,
                                          spec.samples, spec.seed, spec.p, workers,
                                          spec.max_attempts, name="center_on_ln")
        res.records += [c, P]
        try:
            res.records.append(_quotient("center_over_pi3", c, P))
        except DegenerateEstimates as exc:
            res.refusals.append(str(exc))
    res.wall_time = time.perf_counter() - t0
    return res


def _stack_sample(N, cfg):
    rec = detect_circuit_stack(cfg, N, k=0)
    rec.check()
    return float(rec.occurred_hatC[0]), float(rec.occurred_D[0]), float(rec.occurred_C[1])


def run_circuit_stack(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    """Frequencies of the first block event and two of its annulus events."""
    from .sampling import pmap

    t0 = time.perf_counter()
    res = ExperimentResult(spec)
    seed = derive_seed(spec.seed, _CIRCUIT_STREAM)
    for n in spec.ns:
        if n < 1 << (10 * spec.N):
            raise ValueError(f"--n {n} is below 2^(10N) = {1 << (10 * spec.N)}")
        rows = pmap(partial(_stack_sample, spec.N), n, range(spec.samples), seed, spec.p,
                    workers)
        for j, name in enumerate(("hatC_0", "D_0", "C_1")):
            res.records.append(EstimateRecord.from_values(name, n, [r[j] for r in rows]))
    res.wall_time = time.perf_counter() - t0
    return res


def _brute_total(recs) -> int:
    best = 0
    for m in range(len(recs) + 1):
        for sub in itertools.combinations(recs, m):
            iv = sorted(r.tau for r in sub)
            if all(a[1] < b[0] for a, b in zip(iv[:-1], iv[1:])):
                best = max(best, sum(r.tau_len for r in sub))
    return best


def audit_sample(kappa, epsilon, cfg):
    """Shortcut audit of one configuration; integer counters only."""
    g = cfg.geometry
    n = g.n
    low = lowest_crossing(cfg)
    S = shortest_crossing(cfg).length
    fam = find_all_shortcuts(cfg, low, kappa, epsilon)
    recs = [r for v in fam.values() for r in v]
    bad_reval = sum(1 for r in recs if not all(revalidate(r, cfg, low, kappa).values()))
    nested_ok = verify_nested_or_disjoint(recs)
    plan = select_maximal(fam, low)
    brute_checked = brute_bad = 0
    if len(recs) <= 12:
        brute_checked = 1
        # scale by scale, the same greedy-over-scales rule but with subset enumeration
        chosen: list = []
        for s in sorted(fam, reverse=True):
            free = [r for r in fam[s] if all(r.tau[1] < c.tau[0] or r.tau[0] > c.tau[1]
                                            for c in chosen)]
            best = _brute_total(free)
            picked = weighted_interval_scheduling(free)
            if sum(r.tau_len for r in picked) != best:
                brute_bad += 1
            chosen += picked
        brute_bad += int(plan.detoured_length != sum(r.tau_len for r in chosen))
    sigma = build_sigma(low, plan)
    identity = sigma.length == low.length - sum(r.tau_len for r in plan.chosen) + sum(
        r.r_len for r in plan.chosen)
    xs = {v[0] for v in (sigma.vertices[0], sigma.vertices[-1])}
    sigma_ok = (sigma.is_open(cfg.states) and xs == {-n, n} and sigma.is_self_avoiding)
    order_ok = 2 * n <= S <= low.length and sigma.length <= low.length
    return (len(recs), bad_reval, int(not nested_ok), brute_checked, brute_bad,
            int(not identity), int(not sigma_ok), int(not order_ok), sigma.length, low.length)


AUDIT_FIELDS = ("records", "revalidation_failures", "nesting_failures", "brute_checked",
                "selection_mismatches", "identity_failures", "sigma_failures",
                "order_violations")


def run_shortcut_audit(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    t0 = time.perf_counter()
    res = ExperimentResult(spec)
    totals = dict.fromkeys(AUDIT_FIELDS, 0)
    for n in spec.ns:
        rows, att = _conditioned(spec, partial(audit_sample, spec.kappa, spec.epsilon), n, workers)
        for i, k in enumerate(AUDIT_FIELDS):
            totals[k] += sum(r[i] for r in rows)
        res.records.append(EstimateRecord.from_values("shortcuts", n, [r[0] for r in rows], att))
        q, se = ratio_of_means([r[8] for r in rows], [r[9] for r in rows])
        res.records.append(_record("sigma_over_L", n, q, se, len(rows), att))
    res.extras.update(totals)
    res.wall_time = time.perf_counter() - t0
    return res


RUNNERS = {
    "ratio": run_ratio_experiment,
    "pi3-scaling": run_pi3_scaling,
    "lowest-volume": run_lowest_volume,
    "conditional-3arm": run_conditional_3arm,
    "circuit-stack": run_circuit_stack,
    "shortcut-audit": run_shortcut_audit,
}


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> ExperimentResult:
    return RUNNERS[spec.kind](spec, workers)
