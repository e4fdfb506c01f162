"""Seeded Brownian paths and their time-extended (Wong-Zakai) signature lifts.

Every path owns a Philox counter-based stream keyed by ``(seed, path_index)``;
draw ``k`` of that stream is the ``k``-th Gaussian of the path.  A path can
therefore be regenerated in isolation, in any order, on any worker.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .path import PathGrid, SignatureTrajectory, prefix_signatures, terminal_signatures

MAX_LEVEL = 10
MAX_WIDTH = 6


@dataclass(frozen=True)
class BrownianConfig:
    d: int = 1
    T: float = 1.0
    K: int = 1024
    seed: int = 0
    n_paths: int = 1

    def __post_init__(self):
        if self.d < 1 or self.d + 1 > MAX_WIDTH:
            raise ValueError(f"d must lie in [1, {MAX_WIDTH - 1}]")
        if self.K < 2 or self.K & (self.K - 1):
            raise ValueError("K must be a power of two >= 2")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.K + 1)

    def to_dict(self) -> dict:
        return asdict(self)


def _generator(seed: int, path_index: int) -> np.random.Generator:
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(cfg: BrownianConfig, indices: Sequence[int]) -> np.ndarray:
    """Brownian increments, shape (len(indices), K, d)."""
    out = np.empty((len(indices), cfg.K, cfg.d))
    scale = math.sqrt(cfg.dt)
    for row, idx in enumerate(indices):
        if not 0 <= idx < cfg.n_paths:
            raise IndexError(f"path index {idx} outside [0, {cfg.n_paths})")
        out[row] = _generator(cfg.seed, int(idx)).standard_normal((cfg.K, cfg.d)) * scale
    return out


def extended_increments(cfg: BrownianConfig, indices: Sequence[int]) -> np.ndarray:
    """Increments of the time-extended path, shape (B, K, d+1), letter 0 = dt."""
    dw = brownian_increments(cfg, indices)
    dt = np.full(dw.shape[:-1] + (1,), cfg.dt)
    return np.concatenate([dt, dw], axis=-1)


def brownian_values(dw: np.ndarray) -> np.ndarray:
    """Cumulative path values (B, K+1, d) starting at 0."""
    out = np.zeros(dw.shape[:-2] + (dw.shape[-2] + 1, dw.shape[-1]))
    np.cumsum(dw, axis=-2, out=out[..., 1:, :])
    return out


def simulate_bm(cfg: BrownianConfig, path_index: int) -> PathGrid:
    dw = brownian_increments(cfg, [path_index])[0]
    return PathGrid(cfg.times, brownian_values(dw))


def _check_level(N: int):
    if not 0 <= N <= MAX_LEVEL:
        raise ValueError(f"N must lie in [0, {MAX_LEVEL}]")


def brownian_signature_trajectory(cfg: BrownianConfig, path_index: int, N: int) -> SignatureTrajectory:
    _check_level(N)
    incs = extended_increments(cfg, [path_index])[0]
    return SignatureTrajectory(cfg.times, N, cfg.d + 1, prefix_signatures(incs, N))


def chunked(indices: Sequence[int], chunk_size: int) -> list[list[int]]:
    indices = list(indices)
    return [indices[i : i + chunk_size] for i in range(0, len(indices), chunk_size)]


def map_chunks(fn: Callable, indices: Sequence[int], chunk_size: int = 1000, threads: int = 1) -> Iterator:
    """Apply ``fn`` to consecutive index chunks, yielding results in chunk order.

    The thread count only changes scheduling: chunks are independent and
    results are consumed in index order, so output never depends on it.
    """
    chunks = chunked(indices, chunk_size)
    if threads <= 1:
        for c in chunks:
            yield fn(c)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # bounded look-ahead keeps memory at O(threads) chunks
        pending = []
        it = iter(chunks)
        for c in it:
            pending.append(pool.submit(fn, c))
            if len(pending) >= 2 * threads:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()


def terminal_signature_batch(cfg: BrownianConfig, indices: Sequence[int], N: int) -> np.ndarray:
    _check_level(N)
    return terminal_signatures(extended_increments(cfg, indices), N)


def expected_signature_closed_form(d: int, T: float, N: int):
    """exp(T (e_0 + 1/2 sum_i e_i (x) e_i)) for the time-extended Stratonovich lift."""
    from .tensor import TruncatedTensor, tensor_exp

    gen = {(0,): T}
    if N >= 2:
        for i in range(1, d + 1):
            gen[(i, i)] = 0.5 * T
    return tensor_exp(TruncatedTensor.from_words(d + 1, N, gen))
