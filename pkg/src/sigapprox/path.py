"""Piecewise-linear paths, time extension and truncated signatures."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numba
import numpy as np

from .tensor import (
    DimensionError,
    TruncatedTensor,
    inverse_flat,
    level_offsets,
    mul_flat,
    segment_exp_flat,
    tensor_dim,
)


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Grid times ``t_0 = 0 < ... < t_K`` with values in R^d, linear in between."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or len(times) < 1:
            raise GridError("times must be a non-empty 1-d array")
        if len(values) != len(times):
            raise GridError(f"{len(values)} values for {len(times)} times")
        if times[0] != 0.0:
            raise GridError("grid must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise GridError("times must be strictly increasing")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n_segments(self) -> int:
        return len(self.times) - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def scaled(self, factor: float) -> PathGrid:
        """Dilate space values by ``factor`` about the starting point."""
        return PathGrid(self.times, self.values[0] + factor * (self.values - self.values[0]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(self.d)])
        for t, row in zip(self.times, self.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> PathGrid:
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[0] != "t" or header[1:] != [f"x{i + 1}" for i in range(len(header) - 1)]:
            raise GridError(f"unexpected header {header}")
        arr = np.array([[float(x) for x in r] for r in body])
        return cls(arr[:, 0], arr[:, 1:])


@dataclass(frozen=True, eq=False)
class TimeExtendedPath:
    """Path in R^{d+1} whose letter 0 is the running time."""

    base: PathGrid

    @property
    def width(self) -> int:
        return self.base.d + 1

    @property
    def times(self) -> np.ndarray:
        return self.base.times

    @property
    def values(self) -> np.ndarray:
        return np.column_stack([self.base.times, self.base.values])

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def project(self) -> PathGrid:
        return PathGrid(self.base.times, self.values[:, 1:])


def time_extend(p: PathGrid) -> TimeExtendedPath:
    return TimeExtendedPath(p)


@dataclass(frozen=True, eq=False)
class SignatureTrajectory:
    """Prefix signatures S_{0,t_k} at every grid time, stored as (K+1, dim)."""

    times: np.ndarray
    level_cap: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.times), tensor_dim(self.width, self.level_cap)):
            raise DimensionError("trajectory array does not match times/width/level_cap")

    def __len__(self):
        return len(self.times)

    def tensor(self, k: int) -> TruncatedTensor:
        return TruncatedTensor(self.width, self.level_cap, self.values[k])

    @property
    def tensors(self) -> list[TruncatedTensor]:
        return [self.tensor(k) for k in range(len(self))]

    def terminal(self) -> TruncatedTensor:
        return self.tensor(len(self) - 1)

    def increment(self, k_from: int, k_to: int) -> TruncatedTensor:
        """S_{t_from, t_to} = S_{0,t_from}^{-1} (x) S_{0,t_to}."""
        inv = inverse_flat(self.values[k_from], self.width, self.level_cap)
        return TruncatedTensor(self.width, self.level_cap, mul_flat(inv, self.values[k_to], self.width, self.level_cap))

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "level_cap": self.level_cap,
            "width": self.width,
            "tensors": [t.to_dict() for t in self.tensors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> SignatureTrajectory:
        tensors = [TruncatedTensor.from_dict(t) for t in obj["tensors"]]
        return cls(
            np.asarray(obj["times"], dtype=np.float64),
            int(obj["level_cap"]),
            int(obj["width"]),
            np.stack([t.data for t in tensors]),
        )


# --------------------------------------------------------------------------
# batched kernels


@numba.njit(cache=True, nogil=True)
def _sweep(increments, level_cap, offsets, keep_all):
    """Left-to-right Chen sweep S <- S (x) exp(delta), Horner form per level."""
    n_path, n_seg, width = increments.shape
    dim = offsets[level_cap + 1]
    n_out = n_seg + 1 if keep_all else 1
    out = np.empty((n_path, n_out, dim))
    top = width**level_cap if level_cap > 0 else 1
    acc = np.empty(top)
    nxt = np.empty(top)
    cur = np.empty(dim)
    for b in range(n_path):
        cur[:] = 0.0
        cur[0] = 1.0
        if keep_all:
            out[b, 0] = cur
        for k in range(n_seg):
            delta = increments[b, k]
            for n in range(level_cap, 0, -1):
                for j in range(width):
                    acc[j] = cur[0] * delta[j] / n
                size = width
                for lv in range(1, n):
                    base = offsets[lv]
                    inv = 1.0 / (n - lv)
                    for i in range(size):
                        a = (acc[i] + cur[base + i]) * inv
                        for j in range(width):
                            nxt[i * width + j] = a * delta[j]
                    size *= width
                    acc, nxt = nxt, acc
                base = offsets[n]
                for i in range(size):
                    cur[base + i] += acc[i]
            if keep_all:
                out[b, k + 1] = cur
        if not keep_all:
            out[b, 0] = cur
    return out


def _run_sweep(increments: np.ndarray, level_cap: int, keep_all: bool) -> np.ndarray:
    increments = np.asarray(increments, dtype=np.float64)
    *batch, n_seg, width = increments.shape
    n_path = int(np.prod(batch, dtype=np.int64))
    flat = np.ascontiguousarray(increments.reshape((n_path, n_seg, width)))
    offs = np.array(level_offsets(width, level_cap), dtype=np.int64)
    out = _sweep(flat, level_cap, offs, keep_all)
    if keep_all:
        return out.reshape(tuple(batch) + (n_seg + 1, out.shape[-1]))
    return out.reshape(tuple(batch) + (out.shape[-1],))


def prefix_signatures(increments: np.ndarray, level_cap: int) -> np.ndarray:
    """Prefix signatures for a batch of piecewise-linear paths.

    ``increments`` has shape (..., K, width); returns (..., K+1, dim).
    """
    return _run_sweep(increments, level_cap, True)


def terminal_signatures(increments: np.ndarray, level_cap: int) -> np.ndarray:
    """Like :func:`prefix_signatures` but only keeps S_{0,T}; shape (..., dim)."""
    return _run_sweep(increments, level_cap, False)


# --------------------------------------------------------------------------
# public operations


def segment_signature(delta, N: int) -> TruncatedTensor:
    delta = np.asarray(delta, dtype=np.float64)
    if N < 0:
        raise DimensionError("N must be >= 0")
    return TruncatedTensor(len(delta), N, segment_exp_flat(delta, N))


def signature_over(p: TimeExtendedPath, k_from: int, k_to: int, N: int) -> TruncatedTensor:
    """Signature of the path restricted to [t_{k_from}, t_{k_to}] via Chen products."""
    n_pts = len(p.times)
    if not (0 <= k_from <= k_to < n_pts):
        raise IndexError(f"need 0 <= k_from <= k_to < {n_pts}, got ({k_from}, {k_to})")
    incs = p.increments()[k_from:k_to]
    return TruncatedTensor(p.width, N, terminal_signatures(incs, N))


def signature_trajectory(p: TimeExtendedPath, N: int) -> SignatureTrajectory:
    vals = prefix_signatures(p.increments(), N)
    return SignatureTrajectory(np.array(p.times), N, p.width, vals)


def holder_norm(p, alpha: float) -> float:
    """Grid alpha-Hoelder seminorm: max |X_t - X_s| / |t - s|^alpha over grid pairs.

    Accepts a :class:`PathGrid` or a :class:`TimeExtendedPath` (in which case the
    time coordinate is part of the increment).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    times = np.asarray(p.times)
    values = np.asarray(p.values)
    if len(times) < 2:
        raise GridError("Hoelder norm needs at least two grid points")
    from .norms import _pair_sup_level1

    return float(_pair_sup_level1(times, values.reshape(len(times), -1), alpha))
