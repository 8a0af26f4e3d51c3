"""Per-sample seeding, process-parallel maps and rejection conditioning.

Sample ``i`` at box size ``n`` always gets the seed ``derive_seed(master, n, i)``,
and accepted samples are the first ones in index order, so every result is a
function of (master seed, n, samples) alone, whatever the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial

from .lattice import Config, derive_seed, make_box, sample_config

CHUNK = 64


class InsufficientConditioning(RuntimeError):
    """The conditioning event was not observed often enough within the attempt budget."""


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("PERC_WORKERS", "1"))
    return max(1, int(workers))


def config_for(n: int, index: int, master_seed: int, p: float = 0.5) -> Config:
    return sample_config(make_box(n), p, derive_seed(master_seed, n, index))


def _eval(fn, n, master_seed, p, index):
    return fn(config_for(n, index, master_seed, p))


def pmap(fn, n: int, indices, master_seed: int, p: float = 0.5, workers: int | None = None,
         pool=None):
    """[fn(config_i) for i in indices], evaluated in worker processes if asked."""
    job = partial(_eval, fn, n, master_seed, p)
    indices = list(indices)
    if pool is not None:
        return list(pool.map(job, indices, chunksize=max(1, len(indices) // 32)))
    if resolve_workers(workers) == 1:
        return [job(i) for i in indices]
    with ProcessPoolExecutor(resolve_workers(workers)) as ex:
        return list(ex.map(job, indices, chunksize=max(1, len(indices) // 32)))


def _conditioned(fn, accept, n, master_seed, p, index):
    cfg = config_for(n, index, master_seed, p)
    if not accept(cfg):
        return False, None
    return True, fn(cfg)


def conditioned_samples(fn, accept, n: int, samples: int, master_seed: int, p: float = 0.5,
                        workers: int | None = None, max_attempts: int | None = None):
    """Values of ``fn`` on the first ``samples`` configurations satisfying ``accept``.

    Returns (values, attempts) where attempts counts every index examined up
    to and including the last accepted one.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if max_attempts is None:
        max_attempts = max(1000, 100 * samples)
    job = partial(_conditioned, fn, accept, n, master_seed, p)
    values = []
    attempts = 0
    start = 0
    w = resolve_workers(workers)
    ex = ProcessPoolExecutor(w) if w > 1 else None
    try:
        while len(values) < samples:
            if start >= max_attempts:
                raise InsufficientConditioning(
                    f"only {len(values)} of {samples} conditioned samples in {max_attempts} "
                    f"attempts at n={n}: insufficient conditioning mass")
            # chunk size does not depend on the worker count, so neither does the result
            need = samples - len(values)
            size = min(max_attempts - start, max(CHUNK, 2 * need))
            idx = range(start, start + size)
            if ex is None:
                out = [job(i) for i in idx]
            else:
                out = list(ex.map(job, idx, chunksize=max(1, size // (4 * w))))
            for i, (ok, val) in zip(idx, out):
                if ok:
                    values.append(val)
                    if len(values) == samples:
                        attempts = i + 1
                        break
            start += size
    finally:
        if ex is not None:
            ex.shutdown()
    return values, attempts
