"""Linear functionals on truncated signatures fitted by empirical L^p minimisation.

Feature columns are signature coordinates ordered by word length, then
lexicographically, so the columns for level N are a prefix of those for any
higher level.  The p = 2 solver exploits this: one streaming QR of the widest
feature matrix serves every N in a sweep.  Other p use IRLS on top of the
same weighted least-squares step.

Data enters the solvers as a *source*: a zero-argument callable returning an
iterable of ``(X, y, n_groups)`` chunks, where the rows of a chunk belong to
``n_groups`` equally sized groups (paths).  Sources are re-iterated whenever a
solver needs another pass, which keeps memory flat for large experiments.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .tensor import TruncatedTensor, index_word, tensor_dim, word_index

log = logging.getLogger(__name__)

Source = Callable[[], Iterable[tuple[np.ndarray, np.ndarray, int]]]

IRLS_FLOOR = 1e-8
IRLS_MAX_ITER = 100
IRLS_RTOL = 1e-10
DEFAULT_RIDGE_FACTOR = 1e-8


class FitError(RuntimeError):
    """Numerical failure in a fit (non-finite data, singular solve)."""


@dataclass(frozen=True, eq=False)
class LinearFunctional:
    """l(g) = sum_{|I| <= N} l_I <e_I, g>, coefficients stored in flat word order."""

    width: int
    level_cap: int
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.float64)
        if arr.shape != (tensor_dim(self.width, self.level_cap),):
            raise ValueError("coefficient vector does not match width/level_cap")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_words(cls, width: int, level_cap: int, coeffs: dict) -> LinearFunctional:
        arr = np.zeros(tensor_dim(width, level_cap))
        for w, v in coeffs.items():
            if len(w) > level_cap:
                raise ValueError(f"word {w} longer than level cap {level_cap}")
            arr[word_index(w, width)] += v
        return cls(width, level_cap, arr)

    def __getitem__(self, word) -> float:
        return float(self.coeffs[word_index(tuple(word), self.width)])

    def evaluate(self, sigs) -> np.ndarray | float:
        """Evaluate on a TruncatedTensor or on raw flat coefficient arrays (..., dim')."""
        if isinstance(sigs, TruncatedTensor):
            if sigs.width != self.width or sigs.level_cap < self.level_cap:
                raise ValueError("tensor incompatible with functional")
            return float(sigs.data[: len(self.coeffs)] @ self.coeffs)
        arr = np.asarray(sigs, dtype=np.float64)
        return arr[..., : len(self.coeffs)] @ self.coeffs

    __call__ = evaluate

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "level_cap": self.level_cap,
            "coeffs": [
                {"word": list(index_word(i, self.width)), "value": float(v)} for i, v in enumerate(self.coeffs)
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> LinearFunctional:
        return cls.from_words(
            int(obj["width"]), int(obj["level_cap"]), {tuple(c["word"]): float(c["value"]) for c in obj["coeffs"]}
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class FitReport:
    p: float
    N: int
    n_train: int
    n_test: int
    train_error: float
    test_error: float
    ridge_lambda: float
    condition_diag: float
    train_power: float = math.nan
    test_power: float = math.nan
    train_rel_error: float = math.nan
    test_rel_error: float = math.nan
    test_std_err: float = math.nan
    scaled: bool = False
    converged: bool = True
    n_iter: int = 0
    rank: int = 0

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# features


def feature_matrix(sigs, N: int) -> np.ndarray:
    """Rows = samples, columns = all words of length <= N (the empty word is column 0)."""
    if isinstance(sigs, TruncatedTensor):
        sigs = [sigs]
    if isinstance(sigs, np.ndarray):
        raise TypeError("raw arrays carry no width; use feature_columns")
    sigs = list(sigs)
    if not sigs:
        raise ValueError("no signatures given")
    width, cap = sigs[0].width, sigs[0].level_cap
    for s in sigs:
        if (s.width, s.level_cap) != (width, cap):
            raise ValueError("signatures must share width and level_cap")
    if cap < N:
        raise ValueError(f"level_cap {cap} < requested N = {N}")
    return np.stack([s.data[: tensor_dim(width, N)] for s in sigs])


def feature_columns(sig_values: np.ndarray, width: int, N: int) -> np.ndarray:
    """Column slice of raw flat signature arrays for level N."""
    m = tensor_dim(width, N)
    if sig_values.shape[-1] < m:
        raise ValueError(f"signature arrays too short for N = {N}")
    return sig_values[..., :m]


def default_ridge(trace: float, n_cols: int) -> float:
    return DEFAULT_RIDGE_FACTOR * trace / max(n_cols, 1)


# --------------------------------------------------------------------------
# least-squares core


class QRAccumulator:
    """Streaming (TSQR) least squares: keeps R and Q^T y of all rows seen."""

    def __init__(self, n_cols: int):
        self.n_cols = n_cols
        self.R = np.zeros((0, n_cols))
        self.c = np.zeros(0)
        self.colsq = np.zeros(n_cols)
        self.n_rows = 0

    def add(self, X: np.ndarray, y: np.ndarray):
        if X.shape[1] != self.n_cols or len(X) != len(y):
            raise ValueError("chunk shape mismatch")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise FitError("non-finite values in features or targets")
        self.colsq += np.einsum("ij,ij->j", X, X)
        self.n_rows += len(X)
        Q, self.R = np.linalg.qr(np.vstack([self.R, X]))
        self.c = Q.T @ np.concatenate([self.c, y])

    def square_R(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.n_cols
        R = np.zeros((m, m))
        c = np.zeros(m)
        R[: len(self.R)] = self.R[:m]
        c[: len(self.c)] = self.c[:m]
        return R, c

    def solve(self, n_cols: int, ridge: float, scale: np.ndarray | None = None):
        """Ridge solution restricted to the first ``n_cols`` columns.

        Returns (coefficients, condition number, numerical rank).
        """
        R, c = self.square_R()
        Rk = R[:n_cols, :n_cols]
        if scale is not None:
            Rk = Rk / scale[:n_cols]
        A, b = Rk, c[:n_cols]
        if ridge > 0:
            A = np.vstack([Rk, math.sqrt(ridge) * np.eye(n_cols)])
            b = np.concatenate([b, np.zeros(n_cols)])
        coef, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
        if not np.all(np.isfinite(coef)):
            raise FitError("least-squares solve produced non-finite coefficients")
        if scale is not None:
            coef = coef / scale[:n_cols]
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
        return coef, cond, int(rank)


def _column_scale(acc: QRAccumulator) -> np.ndarray:
    scale = np.sqrt(acc.colsq / max(acc.n_rows, 1))
    scale[scale == 0] = 1.0
    return scale


@dataclass
class _Solution:
    n_cols: int
    coef: np.ndarray
    ridge: float
    cond: float
    rank: int
    converged: bool = True
    n_iter: int = 0
    history: list = field(default_factory=list)


def _accumulate(source: Source, n_cols: int, weight_fn=None) -> QRAccumulator:
    acc = QRAccumulator(n_cols)
    for X, y, _ in source():
        X = X[:, :n_cols]
        if weight_fn is not None:
            sw = np.sqrt(weight_fn(X, y))
            X, y = X * sw[:, None], y * sw
        acc.add(X, y)
    return acc


def _objective(source: Source, coef: np.ndarray, p: float, ridge: float) -> float:
    total = 0.0
    for X, y, _ in source():
        r = y - X[:, : len(coef)] @ coef
        total += float(np.sum(np.abs(r) ** p))
    return total + ridge * float(coef @ coef)


def _solve_p2(acc: QRAccumulator, n_cols_list, ridge_lambda, scale_columns):
    scale = _column_scale(acc) if scale_columns else None
    out = []
    for m in n_cols_list:
        if ridge_lambda is None:
            colsq = acc.colsq[:m] / scale[:m] ** 2 if scale is not None else acc.colsq[:m]
            lam = default_ridge(float(colsq.sum()), m)
        else:
            lam = float(ridge_lambda)
        coef, cond, rank = acc.solve(m, lam, scale)
        out.append(_Solution(m, coef, lam, cond, rank))
    return out


def _irls(source: Source, sol: _Solution, p: float, scale_columns: bool) -> _Solution:
    """IRLS with weights |r|^(p-2) (floored) and step halving on objective increase."""
    coef = sol.coef
    lam = sol.ridge
    m = sol.n_cols
    obj = _objective(source, coef, p, lam)
    history = [obj]
    converged = False
    n_iter = 0
    cond, rank = sol.cond, sol.rank
    for n_iter in range(1, IRLS_MAX_ITER + 1):
        cur = coef

        def weights(X, y, cur=cur):
            r = np.abs(y - X @ cur)
            return 0.5 * p * np.maximum(r, IRLS_FLOOR) ** (p - 2.0)

        acc = _accumulate(source, m, weights)
        scale = _column_scale(acc) if scale_columns else None
        cand, cond, rank = acc.solve(m, lam, scale)
        new_obj = _objective(source, cand, p, lam)
        step = 1.0
        while new_obj > obj and step > 2.0**-30:
            step *= 0.5
            trial = coef + step * (cand - coef)
            new_obj = _objective(source, trial, p, lam)
            cand = trial
        if new_obj > obj:
            converged = True  # no descent direction left at working precision
            break
        rel = (obj - new_obj) / max(abs(obj), 1e-300)
        coef, obj = cand, new_obj
        history.append(obj)
        if rel < IRLS_RTOL:
            converged = True
            break
    if not converged:
        log.warning("IRLS did not converge in %d iterations (p=%g, %d columns)", IRLS_MAX_ITER, p, m)
    return _Solution(m, coef, lam, cond, rank, converged, n_iter, history)


def solve_source(
    source: Source,
    n_cols_list: Sequence[int],
    p: float = 2.0,
    ridge_lambda: float | None = None,
    scale_columns: bool = False,
) -> list[_Solution]:
    if p < 1:
        raise ValueError("p must be >= 1")
    if ridge_lambda is not None and ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    n_max = max(n_cols_list)
    acc = _accumulate(source, n_max)
    if acc.n_rows < 1:
        raise ValueError("no training rows")
    sols = _solve_p2(acc, n_cols_list, ridge_lambda, scale_columns)
    if p != 2.0:
        sols = [_irls(source, s, p, scale_columns) for s in sols]
    return sols


@dataclass
class _ErrorStats:
    power: float
    error: float
    rel_error: float
    std_err: float
    n_groups: int


def error_stats(source: Source, coefs: Sequence[np.ndarray], p: float, time_weight: float = 1.0) -> list[_ErrorStats]:
    """Empirical (time-weighted) L^p errors of several coefficient vectors in one pass.

    Per group g: v_g = time_weight * mean_rows |r|^p; error = (mean_g v_g)^(1/p).
    """
    per_group: list[list[np.ndarray]] = [[] for _ in coefs]
    target_pow: list[np.ndarray] = []
    for X, y, n_groups in source():
        target_pow.append(time_weight * np.mean(np.abs(y).reshape(n_groups, -1) ** p, axis=1))
        for i, coef in enumerate(coefs):
            r = y - X[:, : len(coef)] @ coef
            per_group[i].append(time_weight * np.mean(np.abs(r).reshape(n_groups, -1) ** p, axis=1))
    if not target_pow:
        return [_ErrorStats(math.nan, math.nan, math.nan, math.nan, 0) for _ in coefs]
    tscale = float(np.mean(np.concatenate(target_pow))) ** (1.0 / p)
    out = []
    for groups in per_group:
        v = np.concatenate(groups)
        power = float(np.mean(v))
        err = power ** (1.0 / p)
        se_pow = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
        se = se_pow * power ** (1.0 / p - 1.0) / p if power > 0 else 0.0
        out.append(_ErrorStats(power, err, err / tscale if tscale > 0 else math.nan, se, len(v)))
    return out


def fit_sources(
    train: Source,
    test: Source | None,
    width: int,
    N_list: Sequence[int],
    p: float = 2.0,
    ridge_lambda: float | None = None,
    time_weight: float = 1.0,
    scale_columns: bool = False,
) -> list[tuple[LinearFunctional, FitReport]]:
    """Fit one functional per level in ``N_list`` from streamed data and report errors."""
    n_cols = [tensor_dim(width, N) for N in N_list]
    sols = solve_source(train, n_cols, p, ridge_lambda, scale_columns)
    coefs = [s.coef for s in sols]
    tr = error_stats(train, coefs, p, time_weight)
    te = error_stats(test, coefs, p, time_weight) if test is not None else [None] * len(coefs)
    if not all(math.isfinite(a.power) for a in tr):
        raise FitError("training error is not finite (targets too large for float64)")
    out = []
    for N, s, a, b in zip(N_list, sols, tr, te):
        report = FitReport(
            p=p,
            N=N,
            n_train=a.n_groups,
            n_test=b.n_groups if b else 0,
            train_error=a.error,
            test_error=b.error if b else math.nan,
            ridge_lambda=s.ridge,
            condition_diag=s.cond,
            train_power=a.power,
            test_power=b.power if b else math.nan,
            train_rel_error=a.rel_error,
            test_rel_error=b.rel_error if b else math.nan,
            test_std_err=b.std_err if b else math.nan,
            scaled=scale_columns,
            converged=s.converged,
            n_iter=s.n_iter,
            rank=s.rank,
        )
        out.append((LinearFunctional(width, N, s.coef), report))
    return out


# --------------------------------------------------------------------------
# in-memory front ends


def _matrix_source(X, y, n_groups=None) -> Source:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be 2-d with one row per target")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("non-finite values in features or targets")
    g = len(y) if n_groups is None else n_groups
    return lambda: [(X, y, g)]


def _infer_layout(n_cols: int) -> tuple[int, int]:
    for width in range(2, 7):
        for N in range(0, 11):
            if tensor_dim(width, N) == n_cols:
                return width, N
    return 1, n_cols - 1


def fit_lp(
    features,
    targets,
    p: float = 2.0,
    ridge_lambda: float | None = None,
    *,
    test_features=None,
    test_targets=None,
    width: int | None = None,
    level_cap: int | None = None,
    scale_columns: bool = False,
) -> tuple[LinearFunctional, FitReport]:
    """Minimise sum |y - X l|^p + ridge |l|^2; p = 2 by QR, otherwise IRLS.

    ``ridge_lambda=None`` uses 1e-8 * trace(X^T X) / n_cols.  The column layout
    (width, level_cap) is inferred from the column count unless given.
    """
    X = np.asarray(features, dtype=np.float64)
    if width is None or level_cap is None:
        width, level_cap = _infer_layout(X.shape[1])
    if tensor_dim(width, level_cap) != X.shape[1]:
        raise ValueError("column count does not match width/level_cap")
    train = _matrix_source(X, targets)
    test = _matrix_source(test_features, test_targets) if test_features is not None else None
    return fit_sources(train, test, width, [level_cap], p, ridge_lambda, 1.0, scale_columns)[0]


def lp_power(residuals, p: float) -> float:
    return float(np.mean(np.abs(np.asarray(residuals, dtype=np.float64)) ** p))


def evaluate_lp(ell: LinearFunctional, sigs, targets, p: float = 2.0) -> float:
    """(mean |target - l(sig)|^p)^(1/p)."""
    if isinstance(sigs, (list, tuple)) and sigs and isinstance(sigs[0], TruncatedTensor):
        sigs = np.stack([s.data for s in sigs])
    sigs = np.atleast_2d(np.asarray(sigs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if len(sigs) != len(targets):
        raise ValueError("signature and target counts differ")
    return lp_power(targets - ell.evaluate(sigs), p) ** (1.0 / p)


def _trajectory_source(trajs, target_process) -> tuple[Source, float, int]:
    trajs = list(trajs)
    if not trajs:
        raise ValueError("no trajectories")
    width, cap = trajs[0].width, trajs[0].level_cap
    K = len(trajs[0].times) - 1
    targets = [np.asarray(t, dtype=np.float64) for t in target_process]
    if len(targets) != len(trajs):
        raise ValueError("one target series per trajectory required")
    for tr, y in zip(trajs, targets):
        if (tr.width, tr.level_cap) != (width, cap) or len(tr.times) != K + 1:
            raise ValueError("trajectories must share grid, width and level_cap")
        if y.shape != (K + 1,) or not np.all(np.isfinite(y)):
            raise ValueError("target missing or non-finite at some (path, time)")
    # left-point rule on [0, T]: rows t_0, ..., t_{K-1}
    X = np.concatenate([tr.values[:-1] for tr in trajs])
    y = np.concatenate([t[:-1] for t in targets])
    horizon = float(trajs[0].times[-1])
    return (lambda: [(X, y, len(trajs))]), horizon, width


def fit_nonanticipative(
    trajs,
    target_process,
    p: float = 2.0,
    N: int = 2,
    ridge_lambda: float | None = None,
    *,
    test_trajs=None,
    test_targets=None,
    scale_columns: bool = False,
) -> tuple[LinearFunctional, FitReport]:
    """One functional of the running signature fitted over all (path, time) pairs.

    Errors are empirical H^p norms: mean over paths of (T/K) sum_k |y_k - l(S_{0,t_k})|^p.
    """
    train, horizon, width = _trajectory_source(trajs, target_process)
    cap = list(trajs)[0].level_cap
    if cap < N:
        raise ValueError(f"trajectories truncated at {cap} < N = {N}")
    test = None
    if test_trajs is not None:
        test, _, _ = _trajectory_source(test_trajs, test_targets)
    return fit_sources(train, test, width, [N], p, ridge_lambda, horizon, scale_columns)[0]


def split_paths(n_paths: int, split_fraction: float = 0.8) -> tuple[range, range]:
    """Train/test split by path index; time points of a path never straddle the split."""
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must lie in (0, 1)")
    n_train = int(round(n_paths * split_fraction))
    n_train = min(max(n_train, 1), n_paths - 1) if n_paths > 1 else n_paths
    return range(0, n_train), range(n_train, n_paths)
