import pytest

from chemdist.crossings import has_horizontal_crossing
from chemdist.lattice import derive_seed
from chemdist.sampling import (
    InsufficientConditioning, conditioned_samples, config_for, pmap, resolve_workers)


def _open_count(cfg):
    return int(cfg.states.sum())


def test_config_for_seeding():
    a, b = config_for(4, 7, 123), config_for(4, 7, 123)
    assert (a.states == b.states).all()
    assert a.seed == derive_seed(123, 4, 7)
    assert (config_for(4, 8, 123).states != a.states).any()


def test_pmap_workers_agree():
    assert pmap(_open_count, 6, range(40), 5, workers=1) == pmap(_open_count, 6, range(40), 5,
                                                                  workers=2)


def test_conditioned_workers_agree():
    one = conditioned_samples(_open_count, has_horizontal_crossing, 8, 50, 11, workers=1)
    two = conditioned_samples(_open_count, has_horizontal_crossing, 8, 50, 11, workers=2)
    assert one == two


def test_conditioned_attempts_are_consistent():
    values, attempts = conditioned_samples(_open_count, has_horizontal_crossing, 5, 30, 3)
    flags = [has_horizontal_crossing(config_for(5, i, 3)) for i in range(attempts)]
    assert sum(flags) == 30 and flags[-1]
    assert values == [_open_count(config_for(5, i, 3)) for i in range(attempts) if flags[i]]


def test_conditioning_failures():
    with pytest.raises(InsufficientConditioning):
        conditioned_samples(_open_count, has_horizontal_crossing, 3, 5, 1, p=0.0,
                            max_attempts=100)
    with pytest.raises(ValueError):
        conditioned_samples(_open_count, has_horizontal_crossing, 3, 0, 1)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("PERC_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(0) == 1
