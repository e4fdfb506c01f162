import numpy as np
import pytest

from sigapprox.brownian import (
    BrownianConfig,
    brownian_increments,
    expected_signature_closed_form,
    map_chunks,
    simulate_bm,
    terminal_signature_batch,
)
from sigapprox.tensor import grouplike_defect, TruncatedTensor


@pytest.mark.parametrize("kw", [dict(K=100), dict(K=1), dict(d=0), dict(T=0.0), dict(n_paths=0), dict(seed=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BrownianConfig(**kw)


def test_path_depends_only_on_seed_and_index():
    cfg = BrownianConfig(d=2, K=64, seed=11, n_paths=6)
    batch = brownian_increments(cfg, [3, 0, 5])
    np.testing.assert_array_equal(batch[0], brownian_increments(cfg, [3])[0])
    np.testing.assert_array_equal(batch[2], brownian_increments(cfg, range(6))[5])
    other = brownian_increments(BrownianConfig(d=2, K=64, seed=12, n_paths=6), [3])[0]
    assert not np.array_equal(batch[0], other)


def test_increment_moments():
    cfg = BrownianConfig(d=1, K=256, T=2.0, seed=1, n_paths=400)
    dw = brownian_increments(cfg, range(400)).ravel()
    assert abs(dw.mean()) < 4 * np.sqrt(cfg.dt / dw.size)
    assert dw.var() == pytest.approx(cfg.dt, rel=0.02)


def test_simulate_bm_grid():
    cfg = BrownianConfig(d=2, K=8, T=0.5)
    p = simulate_bm(cfg, 0)
    assert p.values.shape == (9, 2) and p.horizon == 0.5
    np.testing.assert_array_equal(p.values[0], 0.0)


def test_map_chunks_order_independent_of_threads():
    def square(c):
        return [i * i for i in c]

    one = [x for part in map_chunks(square, range(103), 10, 1) for x in part]
    many = [x for part in map_chunks(square, range(103), 10, 4) for x in part]
    assert one == many == [i * i for i in range(103)]


def test_brownian_signatures_are_grouplike():
    sigs = terminal_signature_batch(BrownianConfig(d=2, K=128, n_paths=5), range(5), 5)
    for s in sigs:
        assert grouplike_defect(TruncatedTensor(3, 5, s), 5).max_defect < 1e-11


def test_expected_signature_low_levels():
    T = 1.5
    e = expected_signature_closed_form(2, T, 4)
    assert e[(0,)] == T and e[(1,)] == 0.0
    assert e[(1, 1)] == pytest.approx(T / 2) and e[(1, 2)] == 0.0
    assert e[(0, 0)] == pytest.approx(T**2 / 2)
    assert e[(1, 1, 2, 2)] == pytest.approx(T**2 / 8)
    assert e[(1, 1, 1, 1)] == pytest.approx(T**2 / 8)


def test_brownian_scaling():
    # horizon 4T rescaled by t -> t/4, x -> x/2 is again Brownian on [0, T]
    n = 10**4
    wide = BrownianConfig(d=1, K=64, T=4.0, seed=21, n_paths=n)
    terminal = brownian_increments(wide, range(n)).sum(axis=1)[:, 0] / 2.0
    var = terminal.var(ddof=1)
    se = var * np.sqrt(2.0 / (n - 1))
    assert abs(var - 1.0) <= 3 * se
