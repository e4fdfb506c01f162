"""Config-driven experiments: streamed Brownian data, targets, fits and diagnostics.

Every routine is a pure function of the :class:`ExperimentConfig`; ``threads``
only changes how chunks are scheduled.
"""
from __future__ import annotations

import math

import numpy as np

from .brownian import brownian_values, extended_increments, map_chunks
from .config import ConfigError, ExperimentConfig
from .norms import exp_moment_from_norms, homogeneous_norm_values
from .path import SignatureTrajectory, prefix_signatures, terminal_signatures
from .regress import fit_sources, split_paths
from .sde import closed_form_target, euler_maruyama, gbm_spec, ou_spec
from .stopped import audit_rows, stop_trajectory

TARGETS = ("time", "w_squared", "gbm", "ou", "gbm_em", "ou_em")
ROWS_PER_CHUNK = 1 << 17


def _param(spec: dict, key: str, default=None) -> float:
    if key in spec:
        return float(spec[key])
    if default is None:
        raise ConfigError(f"target {spec['name']!r} needs parameter {key!r}")
    return float(default)


def target_values(spec: dict, times: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Target process on the grid for driving values ``w`` of shape (B, K+1, d); returns (B, K+1)."""
    name = spec["name"]
    if name == "time":
        return np.broadcast_to(times, w.shape[:2]).copy()
    if name == "w_squared":
        return w[..., 0] ** 2
    if name in ("gbm", "gbm_em"):
        params = {k: _param(spec, k, d) for k, d in (("mu", None), ("sigma", None), ("y0", 1.0))}
    elif name in ("ou", "ou_em"):
        params = {k: _param(spec, k, d) for k, d in (("theta", None), ("sigma", None), ("y0", 1.0))}
    else:
        raise ConfigError(f"unknown target {name!r}; choose from {', '.join(TARGETS)}")
    if name == "gbm":
        return closed_form_target("gbm", params, w[..., :1], times)[..., 0]
    if name == "ou":
        return closed_form_target("ou", params, w[..., :1], times)[..., 0]
    sde = gbm_spec(**params) if name == "gbm_em" else ou_spec(**params)
    return euler_maruyama(sde, w[..., :1], times)[..., 0]


def _chunk_size(cfg: ExperimentConfig) -> int:
    if cfg.target.kind == "process":
        return max(1, ROWS_PER_CHUNK // cfg.brownian.K)
    return 1000


def make_fit_source(cfg: ExperimentConfig, indices, N: int, threads: int = 1):
    """Streamed (X, y, n_paths) chunks; process targets contribute left-point rows t_0..t_{K-1}."""
    bc = cfg.brownian
    times = bc.times
    process = cfg.target.kind == "process"

    def chunk(idx):
        inc = extended_increments(bc, idx)
        w = brownian_values(inc[..., 1:])
        y = target_values(cfg.target.spec, times, w)
        if process:
            sig = prefix_signatures(inc, N)[:, :-1]
            return sig.reshape(-1, sig.shape[-1]), y[:, :-1].reshape(-1), len(idx)
        return terminal_signatures(inc, N), y[:, -1], len(idx)

    def source():
        return map_chunks(chunk, indices, _chunk_size(cfg), threads)

    return source


def run_fit(cfg: ExperimentConfig, threads: int = 1):
    """One (LinearFunctional, FitReport) per level in the config's N_list."""
    reg = cfg.regression
    bc = cfg.brownian
    if bc.n_paths < 2:
        raise ConfigError("fit needs at least two paths")
    train_idx, test_idx = split_paths(bc.n_paths, reg.split_fraction)
    n_max = max(reg.N_list)
    train = make_fit_source(cfg, train_idx, n_max, threads)
    test = make_fit_source(cfg, test_idx, n_max, threads) if len(test_idx) else None
    time_weight = bc.T if cfg.target.kind == "process" else 1.0
    return fit_sources(
        train, test, bc.d + 1, reg.N_list, reg.p, reg.ridge_lambda, time_weight, reg.scale_columns
    )


def path_norms(cfg: ExperimentConfig, threads: int = 1, method: str = "exact") -> np.ndarray:
    """Homogeneous norms of the first ``n_paths`` Brownian lifts, in path order."""
    bc = cfg.brownian
    alpha = cfg.weight.alpha
    width = bc.d + 1

    def chunk(idx):
        sig = prefix_signatures(extended_increments(bc, idx), 2)
        return [homogeneous_norm_values(bc.times, s, width, 2, alpha, method) for s in sig]

    out = []
    for part in map_chunks(chunk, range(bc.n_paths), 100, threads):
        out.extend(part)
    return np.asarray(out)


def run_diagnose(cfg: ExperimentConfig, threads: int = 1, bins: int = 20) -> dict:
    w = cfg.weight
    norms = path_norms(cfg, threads)
    est = exp_moment_from_norms(norms, w)
    half = exp_moment_from_norms(norms[: len(norms) // 2], w) if len(norms) >= 4 else None
    counts, edges = np.histogram(norms, bins=bins)
    return {
        "alpha": w.alpha,
        "beta": w.beta,
        "gamma": w.gamma,
        "p": w.p,
        "mean": _finite_or_none(est.mean),
        "std_err": _finite_or_none(est.std_err),
        "overflow_count": est.overflow_count,
        "n_paths": est.n_paths,
        "half_sample_mean": _finite_or_none(half.mean) if half else None,
        "norm_summary": {
            "min": float(norms.min()),
            "mean": float(norms.mean()),
            "max": float(norms.max()),
        },
        "norm_histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def stop_indices(K: int, count: int) -> list[int]:
    """``count`` evenly spaced interior stop indices."""
    if count < 1:
        raise ConfigError("stop_count must be >= 1")
    return sorted({int(round(K * (j + 1) / (count + 1))) for j in range(count)})


def run_stopped_audit(cfg: ExperimentConfig, threads: int = 1):
    """Audit rows for every path and stop index, plus the worst residual."""
    bc = cfg.brownian
    stops = stop_indices(bc.K, cfg.stop_count)

    def chunk(idx):
        sigs = prefix_signatures(extended_increments(bc, idx), 2)
        rows = []
        for pid, vals in zip(idx, sigs):
            traj = SignatureTrajectory(bc.times, 2, bc.d + 1, vals)
            for k in stops:
                rows.extend((k,) + r for r in audit_rows(stop_trajectory(traj, k), k, pid))
        return rows

    rows = []
    for part in map_chunks(chunk, range(bc.n_paths), 10, threads):
        rows.extend(part)
    worst = max((r[-1] for r in rows), default=0.0)
    return rows, worst
