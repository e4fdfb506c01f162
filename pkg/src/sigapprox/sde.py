"""Target processes: Ito SDEs on the shared Brownian noise and closed-form benchmarks.

Coefficient callables are vectorised: ``drift(t, y)`` maps y of shape (..., m)
to (..., m) and ``diffusion(t, y)`` to (..., m, d).  Smoothness of custom
coefficients (the C_b^3 regularity behind the signature representation) is
the caller's responsibility and is not checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .path import PathGrid


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class SdeSpec:
    m: int
    d: int
    drift: Callable
    diffusion: Callable
    y0: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    diffusion_jacobian: Callable | None = None  # (t, y) -> (..., m, d, m), d sigma_ik / d y_j

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=np.float64))
        if y0.shape != (self.m,):
            raise ValueError(f"y0 must have shape ({self.m},)")
        if self.kind not in ("gbm", "ou", "custom"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "y0", y0)

    def growth_constant(self, ts, ys) -> float:
        """Smallest C with |mu| + |sigma| <= C (1 + |y|) over the sampled points."""
        ts = np.asarray(ts, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64).reshape(len(ts), self.m)
        mu = self.drift(ts[:, None], ys)
        sig = self.diffusion(ts[:, None, None], ys)
        lhs = np.linalg.norm(mu, axis=-1) + np.linalg.norm(sig.reshape(len(ts), -1), axis=-1)
        return float(np.max(lhs / (1.0 + np.linalg.norm(ys, axis=-1))))


def gbm_spec(mu: float, sigma: float, y0: float = 1.0) -> SdeSpec:
    return SdeSpec(
        1,
        1,
        lambda t, y: mu * y,
        lambda t, y: (sigma * y)[..., None],
        np.array([y0]),
        "gbm",
        {"mu": mu, "sigma": sigma, "y0": y0},
        lambda t, y: np.full(y.shape + (1, 1), sigma),
    )


def ou_spec(theta: float, sigma: float, y0: float = 1.0) -> SdeSpec:
    return SdeSpec(
        1,
        1,
        lambda t, y: -theta * y,
        lambda t, y: np.full(y.shape + (1,), sigma),
        np.array([y0]),
        "ou",
        {"theta": theta, "sigma": sigma, "y0": y0},
        lambda t, y: np.zeros(y.shape + (1, 1)),
    )


def _driving_arrays(driving, times=None):
    """Normalise a PathGrid, a (K+1, d) or a (B, K+1, d) array into (times, values[B, K+1, d], single)."""
    if isinstance(driving, PathGrid):
        return driving.times, driving.values[None], True
    values = np.asarray(driving, dtype=np.float64)
    single = values.ndim == 2
    if single:
        values = values[None]
    if times is None:
        raise ValueError("times are required with raw value arrays")
    return np.asarray(times, dtype=np.float64), values, single


def euler_maruyama(spec: SdeSpec, driving, times=None, path_ids=None) -> np.ndarray:
    """Explicit Euler-Maruyama on the driving grid, same increments as the lift.

    Returns (K+1, m) for a single path, else (B, K+1, m).
    """
    ts, w, single = _driving_arrays(driving, times)
    if w.shape[-1] != spec.d:
        raise ValueError(f"driving noise has {w.shape[-1]} components, spec expects {spec.d}")
    dw = np.diff(w, axis=1)
    B, K = dw.shape[:2]
    out = np.empty((B, K + 1, spec.m))
    y = np.broadcast_to(spec.y0, (B, spec.m)).copy()
    out[:, 0] = y
    for k in range(K):
        h = ts[k + 1] - ts[k]
        with np.errstate(over="ignore", invalid="ignore"):  # blow-ups are reported below
            y = y + spec.drift(ts[k], y) * h + np.einsum("bij,bj->bi", spec.diffusion(ts[k], y), dw[:, k])
        bad = ~np.all(np.isfinite(y), axis=1)
        if bad.any():
            row = int(np.argmax(bad))
            pid = path_ids[row] if path_ids is not None else row
            raise NumericalError(f"non-finite state on path {pid} at step {k + 1}")
        out[:, k + 1] = y
    return out[0] if single else out


def ito_to_stratonovich(spec: SdeSpec) -> Callable:
    """Stratonovich drift mu~_i = mu_i - 1/2 sum_{j,k} sigma_jk d sigma_ik / d y_j."""

    def jac(t, y):
        if spec.diffusion_jacobian is not None:
            return spec.diffusion_jacobian(t, y)
        y = np.asarray(y, dtype=np.float64)
        out = np.empty(y.shape[:-1] + (spec.m, spec.d, spec.m))
        step = 1e-6 * (1.0 + np.linalg.norm(y, axis=-1, keepdims=True))
        for j in range(spec.m):
            e = np.zeros(spec.m)
            e[j] = 1.0
            up = spec.diffusion(t, y + step * e)
            dn = spec.diffusion(t, y - step * e)
            out[..., j] = (up - dn) / (2.0 * step[..., None])
        return out

    def corrected(t, y):
        y = np.asarray(y, dtype=np.float64)
        sig = spec.diffusion(t, y)
        return spec.drift(t, y) - 0.5 * np.einsum("...jk,...ikj->...i", sig, jac(t, y))

    return corrected


def closed_form_target(kind: str, params: dict, driving, times=None) -> np.ndarray:
    """Exact benchmark states on the driving grid (shape like :func:`euler_maruyama`).

    gbm: y0 exp((mu - sigma^2/2) t + sigma W_t).
    ou:  exact recursion for dY = -theta Y dt + sigma dW with the stochastic
         convolution integrated against the piecewise-linear driver, i.e.
         sigma * dW_k * (1 - exp(-theta h)) / (theta h) per step.
    """
    ts, w, single = _driving_arrays(driving, times)
    y0 = float(params.get("y0", 1.0))
    if kind == "gbm":
        mu, sigma = float(params["mu"]), float(params["sigma"])
        out = y0 * np.exp((mu - 0.5 * sigma**2) * ts[None, :] + sigma * w[..., 0])
    elif kind == "ou":
        theta, sigma = float(params["theta"]), float(params["sigma"])
        dw = np.diff(w[..., 0], axis=1)
        out = np.empty(w.shape[:2])
        out[:, 0] = y0
        for k in range(dw.shape[1]):
            h = ts[k + 1] - ts[k]
            decay = math.exp(-theta * h)
            gain = (1.0 - decay) / (theta * h) if theta * h > 0 else 1.0
            out[:, k + 1] = decay * out[:, k] + sigma * gain * dw[:, k]
    else:
        raise ValueError(f"unsupported closed-form kind {kind!r}")
    out = out[..., None]
    return out[0] if single else out
