"""Stopped rough paths: space frozen after the stop time, time keeps running.

Stop times are grid points.  The distance between two stopped paths is
|t - s| plus a grid Hoelder-type distance of the two stopped lifts, built from
the homogeneous norm rather than the Carnot-Caratheodory metric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .norms import _levels12, _pair_sup_diff
from .path import PathGrid, SignatureTrajectory, TimeExtendedPath, signature_trajectory
from .tensor import word_index


@dataclass(frozen=True, eq=False)
class StoppedPath:
    base: TimeExtendedPath
    stop_index: int

    def __post_init__(self):
        if not 0 <= self.stop_index < len(self.base.times):
            raise IndexError(f"stop index {self.stop_index} outside grid of {len(self.base.times)} points")

    @property
    def stop_time(self) -> float:
        return float(self.base.times[self.stop_index])

    @property
    def times(self) -> np.ndarray:
        return self.base.times

    def extended(self) -> TimeExtendedPath:
        vals = np.array(self.base.base.values)
        vals[self.stop_index + 1 :] = vals[self.stop_index]
        return TimeExtendedPath(PathGrid(self.base.times, vals))

    @property
    def values(self) -> np.ndarray:
        return self.extended().values


def stop_path(p: TimeExtendedPath, k_star: int) -> StoppedPath:
    return StoppedPath(p, k_star)


def stopped_signature(sp: StoppedPath, N: int) -> SignatureTrajectory:
    return signature_trajectory(sp.extended(), N)


def stop_trajectory(traj: SignatureTrajectory, k_star: int) -> SignatureTrajectory:
    """Stopped trajectory from an unstopped one: S_{0,t} (x) exp((r - t) e_0) for r > t.

    Equivalent to :func:`stopped_signature` but skips recomputing the prefix.
    """
    from .tensor import mul_flat, segment_exp_flat

    vals = np.array(traj.values)
    t = traj.times[k_star]
    for k in range(k_star + 1, len(traj.times)):
        delta = np.zeros(traj.width)
        delta[0] = traj.times[k] - t
        vals[k] = mul_flat(traj.values[k_star], segment_exp_flat(delta, traj.level_cap), traj.width, traj.level_cap)
    return SignatureTrajectory(traj.times, traj.level_cap, traj.width, vals)


def closed_form_coordinates(sig_at_stop, r: float, d: int) -> dict:
    """Level <= 2 coordinates of the stopped lift at time r >= t, from S_{0,t} alone.

    ``sig_at_stop`` maps words to <e_I, S_{0,t}> (a TruncatedTensor works).
    """
    out = {(0,): r, (0, 0): 0.5 * r * r}
    for i in range(1, d + 1):
        out[(i,)] = sig_at_stop[(i,)]
        for j in range(0, d + 1):
            out[(j, i)] = sig_at_stop[(j, i)]
        out[(i, 0)] = r * sig_at_stop[(i,)] - sig_at_stop[(0, i)]
    return out


def closed_form_residual(stopped: SignatureTrajectory, k_star: int) -> float:
    """Max |computed - closed form| over post-stop grid times and all words of length <= 2."""
    d = stopped.width - 1
    at_stop = stopped.tensor(k_star)
    worst = 0.0
    for k in range(k_star + 1, len(stopped.times)):
        expected = closed_form_coordinates(at_stop, float(stopped.times[k]), d)
        for w, v in expected.items():
            got = stopped.values[k, word_index(w, stopped.width)]
            worst = max(worst, abs(got - v))
    return worst


def audit_rows(stopped: SignatureTrajectory, k_star: int, path_id: int):
    """Rows (path_id, t_index, word, value, closed_form, residual) for |word| <= 2 after the stop."""
    d = stopped.width - 1
    at_stop = stopped.tensor(k_star)
    rows = []
    for k in range(k_star, len(stopped.times)):
        expected = closed_form_coordinates(at_stop, float(stopped.times[k]), d)
        for w in sorted(expected, key=lambda w: (len(w), w)):
            got = float(stopped.values[k, word_index(w, stopped.width)])
            rows.append((path_id, k, w, got, expected[w], abs(got - expected[w])))
    return rows


def lambda_distance(a: StoppedPath, b: StoppedPath, alpha_prime: float) -> float:
    """|t - s| + grid distance between the stopped lifts over the whole horizon."""
    if len(a.times) != len(b.times) or not np.array_equal(a.times, b.times):
        raise ValueError("stopped paths must share the same grid")
    if a.base.width != b.base.width:
        raise ValueError("stopped paths must have the same dimension")
    if not 0.0 < alpha_prime <= 1.0:
        raise ValueError("alpha_prime must lie in (0, 1]")
    sa = stopped_signature(a, 2)
    sb = stopped_signature(b, 2)
    x1, x2 = _levels12(sa.values, sa.width, 2)
    y1, y2 = _levels12(sb.values, sb.width, 2)
    s1, s2 = _pair_sup_diff(np.asarray(a.times, dtype=np.float64), x1, x2, y1, y2, alpha_prime)
    return abs(a.stop_time - b.stop_time) + float(s1) + float(np.sqrt(s2))
