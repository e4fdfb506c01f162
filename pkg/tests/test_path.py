import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigapprox.path import (
    GridError,
    PathGrid,
    SignatureTrajectory,
    holder_norm,
    prefix_signatures,
    segment_signature,
    signature_over,
    signature_trajectory,
    time_extend,
)
from sigapprox.tensor import mul_segment_exp_flat, tensor_inverse, unit_flat, words


def random_grid(rng, K, d, uniform=False):
    if uniform:
        times = np.linspace(0.0, 1.0, K + 1)
    else:
        times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, K))])
    return PathGrid(times, rng.standard_normal((K + 1, d)))


def iterated_sums(delta, word):
    """Explicit discrete formula for <e_I, S> of a piecewise-linear path, |I| <= 3.

    Sum over non-decreasing segment tuples; segments hit m times contribute 1/m!.
    """
    K = len(delta)
    n = len(word)
    total = 0.0
    if n == 1:
        return delta[:, word[0]].sum()
    a = delta[:, word[0]]
    b = delta[:, word[1]]
    if n == 2:
        for k in range(K):
            total += a[k] * b[k] / 2 + a[k] * b[k + 1 :].sum()
        return total
    c = delta[:, word[2]]
    for i in range(K):
        for j in range(i, K):
            for k in range(j, K):
                m = len({i, j, k})
                if m == 1:
                    w = 1 / 6
                elif i == j or j == k:
                    w = 1 / 2
                else:
                    w = 1.0
                total += w * a[i] * b[j] * c[k]
    return total


def test_grid_validation():
    with pytest.raises(GridError):
        PathGrid([0.0, 1.0, 1.0], np.zeros(3))
    with pytest.raises(GridError):
        PathGrid([0.5, 1.0], np.zeros(2))
    with pytest.raises(GridError):
        PathGrid([0.0, 1.0], np.zeros(3))


def test_csv_roundtrip():
    p = random_grid(np.random.default_rng(0), 7, 3)
    back = PathGrid.from_csv(p.to_csv())
    assert np.array_equal(back.times, p.times) and np.array_equal(back.values, p.values)
    assert p.to_csv().splitlines()[0] == "t,x1,x2,x3"


def test_time_extension_prepends_time():
    p = random_grid(np.random.default_rng(1), 4, 2)
    x = time_extend(p)
    assert x.width == 3
    np.testing.assert_array_equal(x.values[:, 0], p.times)
    assert np.array_equal(x.project().values, p.values)


def test_single_segment_is_exponential():
    delta = np.array([0.5, -1.0, 2.0])
    s = segment_signature(delta, 4)
    for w in words(3, 4):
        assert s[w] == pytest.approx(np.prod(delta[list(w)]) / math.factorial(len(w)), rel=1e-14, abs=1e-15)


def test_explicit_sum_oracle():
    rng = np.random.default_rng(2)
    p = time_extend(random_grid(rng, 6, 2))
    sig = signature_trajectory(p, 3).terminal()
    delta = p.increments()
    for w in words(3, 3)[1:]:
        assert sig[w] == pytest.approx(iterated_sums(delta, w), abs=1e-12)


def test_numba_sweep_matches_numpy_chen():
    rng = np.random.default_rng(3)
    inc = rng.standard_normal((20, 3))
    s = unit_flat(3, 5)
    for d in inc:
        s = mul_segment_exp_flat(s, d, 5)
    np.testing.assert_allclose(prefix_signatures(inc, 5)[-1], s, atol=1e-13)


def test_constant_path_signature_is_unit():
    p = PathGrid(np.linspace(0, 1, 5), np.ones((5, 2)))
    sig = prefix_signatures(np.diff(p.values, axis=0), 3)[-1]
    assert sig[0] == 1.0 and np.all(sig[1:] == 0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_chen(seed, d):
    rng = np.random.default_rng(seed)
    p = time_extend(random_grid(rng, 12, d))
    i, j, k = sorted(rng.integers(0, 13, 3))
    lhs = signature_over(p, i, j, 4) @ signature_over(p, j, k, 4)
    assert lhs.allclose(signature_over(p, i, k, 4), 1e-12 * (1 + lhs.norm()))


def test_signature_over_bounds():
    p = time_extend(random_grid(np.random.default_rng(4), 3, 1))
    with pytest.raises(IndexError):
        signature_over(p, 2, 1, 2)
    with pytest.raises(IndexError):
        signature_over(p, 0, 4, 2)


def test_trajectory_increment_and_reversal():
    rng = np.random.default_rng(5)
    p = random_grid(rng, 9, 2)
    traj = signature_trajectory(time_extend(p), 4)
    np.testing.assert_allclose(traj.increment(3, 7).data, signature_over(time_extend(p), 3, 7, 4).data, atol=1e-13)
    # running a path backwards inverts its signature
    rev = PathGrid(p.times, p.values[::-1])
    back = prefix_signatures(np.diff(rev.values, axis=0), 4)[-1]
    fwd = signature_trajectory(time_extend(p), 4)
    from sigapprox.tensor import TruncatedTensor

    fwd_space = TruncatedTensor(2, 4, prefix_signatures(np.diff(p.values, axis=0), 4)[-1])
    np.testing.assert_allclose(tensor_inverse(fwd_space).data, back, atol=1e-12)
    assert len(fwd) == 10


def test_time_coordinate_law():
    p = time_extend(random_grid(np.random.default_rng(6), 10, 2))
    traj = signature_trajectory(p, 6)
    for k, t in enumerate(traj.times):
        for n in range(7):
            assert traj.tensor(k)[(0,) * n] == pytest.approx(t**n / math.factorial(n), rel=1e-13, abs=1e-15)


def test_dilation_scales_levels():
    rng = np.random.default_rng(7)
    p = random_grid(rng, 8, 2)
    lam = 1.7
    a = prefix_signatures(np.diff(p.values, axis=0), 4)[-1]
    b = prefix_signatures(np.diff(p.scaled(lam).values, axis=0), 4)[-1]
    for i, w in enumerate(words(2, 4)):
        assert b[i] == pytest.approx(lam ** len(w) * a[i], rel=1e-12, abs=1e-14)


def test_trajectory_json_roundtrip():
    traj = signature_trajectory(time_extend(random_grid(np.random.default_rng(8), 3, 1)), 2)
    back = SignatureTrajectory.from_dict(traj.to_dict())
    assert np.array_equal(back.values, traj.values)


def test_holder_norm_of_line():
    t = np.linspace(0, 2.0, 9)
    v = np.array([3.0, -4.0])
    p = PathGrid(t, np.outer(t, v))
    assert holder_norm(p, 0.4) == pytest.approx(5.0 * 2.0**0.6, rel=1e-12)
    assert holder_norm(time_extend(p), 0.4) == pytest.approx(math.sqrt(26.0) * 2.0**0.6, rel=1e-12)


def test_segment_against_riemann_sums():
    # fine left-point Riemann sums of iterated integrals along the segment t -> t * delta
    delta = np.array([1.0, 2.0])
    s = segment_signature(delta, 2)
    assert s[(0, 1)] == pytest.approx(1.0) and s[(1, 0)] == pytest.approx(1.0)
    n = 10**4
    x = np.outer(np.arange(n + 1) / n, delta)
    dx = np.diff(x, axis=0)
    for i in range(2):
        for j in range(2):
            riemann = np.sum(x[:-1, i] * dx[:, j])
            assert s[(i, j)] == pytest.approx(riemann, abs=1e-3 * abs(delta[i] * delta[j]))
            # midpoint correction makes the sum exact for linear paths
            assert s[(i, j)] == pytest.approx(riemann + 0.5 * np.sum(dx[:, i] * dx[:, j]), abs=1e-6)
