"""Rough-path norms, the exponential weight and Monte Carlo moment diagnostics.

The Carnot-Caratheodory Hoelder norm has no direct algorithm; everything here
uses the equivalent homogeneous norm

    |||X|||_alpha = ||X||_alpha + sqrt(||X^(2)||_{2 alpha})

evaluated exactly over grid pairs (or bounded from above on dyadic grids).
The equivalence constant C between the two norms, and the Gaussian-tail
constant eta for which E[exp(eta |||W|||^2)] < oo, are not known numerically;
admissible beta ranges are therefore checked empirically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

from .tensor import level_offsets

_LOG_MAX = math.log(np.finfo(np.float64).max)


def _lag_powers(times, alpha):
    """|t_j - t_i|^alpha indexed by lag on uniform grids, else an empty array."""
    times = np.asarray(times, dtype=np.float64)
    h = np.diff(times)
    if len(h) and np.allclose(h, h[0], rtol=1e-12, atol=0.0):
        return (times - times[0]) ** alpha
    return np.empty(0)


@numba.njit(cache=True, nogil=True)
def _pair_sups(times, lvl1, lvl2, alpha, lag_pow, want2):
    """Squared pairwise sups (max |X_{s,t}|^2/h^{2a}, max |X^(2)_{s,t}|^2/h^{4a}).

    Level-2 increments of prefix signatures: S2_t - S2_s - S1_s (x) (S1_t - S1_s).
    """
    n, w = lvl1.shape
    uniform = lag_pow.shape[0] == n
    best1 = 0.0
    best2 = 0.0
    inc = np.empty(w)
    for i in range(n - 1):
        for j in range(i + 1, n):
            hp = lag_pow[j - i] if uniform else (times[j] - times[i]) ** alpha
            hp2 = hp * hp
            acc1 = 0.0
            for a in range(w):
                inc[a] = lvl1[j, a] - lvl1[i, a]
                acc1 += inc[a] * inc[a]
            q1 = acc1 / hp2
            if q1 > best1:
                best1 = q1
            if want2:
                acc2 = 0.0
                for a in range(w):
                    base = lvl1[i, a]
                    for b in range(w):
                        v = lvl2[j, a * w + b] - lvl2[i, a * w + b] - base * inc[b]
                        acc2 += v * v
                q2 = acc2 / (hp2 * hp2)
                if q2 > best2:
                    best2 = q2
    return best1, best2


def _pair_sup_level1(times, values, alpha):
    times = np.asarray(times, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    dummy = np.zeros((values.shape[0], 1))
    s1, _ = _pair_sups(times, values, dummy, alpha, _lag_powers(times, alpha), False)
    return math.sqrt(s1)


def _pair_sup_both(times, l1, l2, alpha):
    """(||X||_alpha, ||X^(2)||_{2 alpha}) over grid pairs."""
    times = np.asarray(times, dtype=np.float64)
    s1, s2 = _pair_sups(times, l1, l2, alpha, _lag_powers(times, alpha), True)
    return math.sqrt(s1), math.sqrt(s2)


@numba.njit(cache=True, nogil=True)
def _pair_sup_diff(times, x1, x2, y1, y2, alpha):
    """Hoelder-type distance terms between two lifts on a common grid."""
    n, w = x1.shape
    best1 = 0.0
    best2 = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            acc1 = 0.0
            acc2 = 0.0
            for a in range(w):
                d1 = (x1[j, a] - x1[i, a]) - (y1[j, a] - y1[i, a])
                acc1 += d1 * d1
                for b in range(w):
                    vx = x2[j, a * w + b] - x2[i, a * w + b] - x1[i, a] * (x1[j, b] - x1[i, b])
                    vy = y2[j, a * w + b] - y2[i, a * w + b] - y1[i, a] * (y1[j, b] - y1[i, b])
                    acc2 += (vx - vy) * (vx - vy)
            h = times[j] - times[i]
            q1 = math.sqrt(acc1) / h**alpha
            q2 = math.sqrt(acc2) / h ** (2.0 * alpha)
            if q1 > best1:
                best1 = q1
            if q2 > best2:
                best2 = q2
    return best1, best2


def _levels12(sig_values: np.ndarray, width: int, level_cap: int):
    offs = level_offsets(width, level_cap)
    return (
        np.ascontiguousarray(sig_values[..., offs[1]:offs[2]]),
        np.ascontiguousarray(sig_values[..., offs[2]:offs[3]]),
    )


def _check_alpha(alpha: float):
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")


def two_param_2alpha_norm(traj, alpha: float) -> float:
    """max over grid pairs of |S^(2)_{s,t}| / |t-s|^{2 alpha}."""
    _check_alpha(alpha)
    if traj.level_cap < 2:
        raise ValueError("level_cap must be >= 2 for the level-2 norm")
    l1, l2 = _levels12(traj.values, traj.width, traj.level_cap)
    return _pair_sup_both(traj.times, l1, l2, alpha)[1]


def _dyadic_bound(times, l1, l2, alpha):
    """Upper bound for both pairwise sups from dyadic blocks only (O(K log K))."""
    n_seg = len(times) - 1
    if n_seg & (n_seg - 1) or not np.allclose(np.diff(times), times[1] - times[0]):
        raise ValueError("dyadic bound needs a uniform grid with a power-of-two segment count")
    w = l1.shape[1]
    a_max = 0.0
    b_max = 0.0
    step = n_seg
    while step >= 1:
        left = np.arange(0, n_seg, step)
        right = left + step
        h = times[right] - times[left]
        inc1 = l1[right] - l1[left]
        inc2 = (
            l2[right]
            - l2[left]
            - (l1[left][:, :, None] * inc1[:, None, :]).reshape(len(left), w * w)
        )
        a_max = max(a_max, float(np.max(np.linalg.norm(inc1, axis=1) / h**alpha)))
        b_max = max(b_max, float(np.max(np.linalg.norm(inc2, axis=1) / h ** (2 * alpha))))
        step //= 2
    c1 = 2.0 / (1.0 - 2.0**-alpha)
    c2 = 2.0 / (1.0 - 2.0 ** (-2 * alpha))
    return c1 * a_max, c2 * b_max + 0.5 * (c1 * a_max) ** 2


def homogeneous_norm_values(times, sig_values, width, level_cap, alpha, method="exact") -> float:
    """Homogeneous norm from raw prefix-signature arrays of one path."""
    _check_alpha(alpha)
    if level_cap < 2:
        raise ValueError("level_cap must be >= 2 for the homogeneous norm")
    times = np.asarray(times, dtype=np.float64)
    l1, l2 = _levels12(sig_values, width, level_cap)
    if method == "exact":
        s1, s2 = _pair_sup_both(times, l1, l2, alpha)
    elif method == "dyadic":
        s1, s2 = _dyadic_bound(times, l1, l2, alpha)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(s1 + math.sqrt(s2))


def homogeneous_rough_norm(traj, alpha: float, method: str = "exact") -> float:
    """||X||_alpha + sqrt(||X^(2)||_{2 alpha}) of a time-extended signature trajectory.

    ``method="dyadic"`` returns a cheap upper bound instead (uniform power-of-two grids).
    """
    return homogeneous_norm_values(traj.times, traj.values, traj.width, traj.level_cap, alpha, method)


@dataclass(frozen=True)
class WeightParams:
    """Parameters of psi = exp(beta * |||X|||_alpha^gamma) and the moment order p.

    ``diagnostic=True`` admits beta = 0 (psi == 1) for sanity runs.
    """

    alpha: float = 0.4
    beta: float = 0.01
    gamma: float = 2.0
    p: float = 2.0
    diagnostic: bool = False

    def __post_init__(self):
        if not 1.0 / 3.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (1/3, 1/2)")
        if self.beta < 0 or (self.beta == 0 and not self.diagnostic):
            raise ValueError("beta must be > 0 (beta = 0 only with diagnostic=True)")
        if self.gamma < math.floor(1.0 / self.alpha):
            raise ValueError("gamma must be >= floor(1/alpha)")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    def log_psi(self, norm: float) -> float:
        return self.beta * norm**self.gamma


def weight_psi(traj, w: WeightParams) -> float:
    """psi(traj) = exp(beta |||traj|||^gamma); raises OverflowError instead of returning inf."""
    log_psi = w.log_psi(homogeneous_rough_norm(traj, w.alpha))
    if log_psi > _LOG_MAX:
        raise OverflowError(f"psi overflows float64 (log psi = {log_psi:.6g})")
    return math.exp(log_psi)


def empirical_weighted_sup(f_vals, psi_vals) -> float:
    f_vals = np.asarray(f_vals, dtype=np.float64)
    psi_vals = np.asarray(psi_vals, dtype=np.float64)
    if f_vals.shape != psi_vals.shape:
        raise ValueError("f_vals and psi_vals must have equal length")
    if np.any(psi_vals <= 0):
        raise ValueError("psi values must be positive")
    if f_vals.size == 0:
        return 0.0
    return float(np.max(np.abs(f_vals) / psi_vals))


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_err: float
    overflow_count: int
    n_paths: int


def exp_moment_from_norms(norms, w: WeightParams) -> MomentEstimate:
    """Monte Carlo E[psi^p] from precomputed homogeneous norms."""
    norms = np.asarray(norms, dtype=np.float64)
    if norms.size < 2:
        raise ValueError("need at least two paths")
    log_vals = w.p * w.beta * norms**w.gamma
    ok = log_vals <= _LOG_MAX
    vals = np.exp(log_vals[ok])
    n_ok = int(ok.sum())
    with np.errstate(over="ignore"):  # huge-but-finite psi^p may still overflow the variance
        mean = float(np.mean(vals)) if n_ok else math.nan
        se = float(np.std(vals, ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.nan
    return MomentEstimate(mean, se, int((~ok).sum()), int(norms.size))


def exp_moment_estimate(paths: Iterable, w: WeightParams) -> MomentEstimate:
    norms = [homogeneous_rough_norm(tr, w.alpha) for tr in paths]
    return exp_moment_from_norms(norms, w)
