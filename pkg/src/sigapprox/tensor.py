"""Truncated tensor algebra over R^width.

Coefficients of all levels are stored in one flat float64 array, level by
level, each level in lexicographic word order.  The ``*_flat`` helpers work
on arrays with arbitrary leading batch dimensions and are what the path
and regression code use in the hot loops; :class:`TruncatedTensor` wraps a
single element for the public, value-semantics API.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

Word = tuple[int, ...]


class DimensionError(ValueError):
    """Operands live in different truncated tensor algebras."""


class DomainError(ValueError):
    """Argument outside the domain of the operation (e.g. log of a non-unit)."""


# --------------------------------------------------------------------------
# layout


@lru_cache(maxsize=None)
def level_offsets(width: int, level_cap: int) -> tuple[int, ...]:
    """Start offsets of each level; the last entry is the total size."""
    offs = [0]
    for n in range(level_cap + 1):
        offs.append(offs[-1] + width**n)
    return tuple(offs)


def tensor_dim(width: int, level_cap: int) -> int:
    return level_offsets(width, level_cap)[-1]


def word_index(word, width: int) -> int:
    """Flat index of ``word`` (level offset plus lexicographic rank)."""
    idx = 0
    for letter in word:
        if not 0 <= letter < width:
            raise DomainError(f"letter {letter} outside alphabet of width {width}")
        idx = idx * width + int(letter)
    return (width ** len(word) - 1) // (width - 1) + idx if width > 1 else len(word)


def index_word(index: int, width: int) -> Word:
    n = 0
    start = 0
    while start + width**n <= index:
        start += width**n
        n += 1
    rank = index - start
    letters = []
    for _ in range(n):
        rank, r = divmod(rank, width)
        letters.append(r)
    return tuple(reversed(letters))


@lru_cache(maxsize=None)
def words(width: int, level_cap: int) -> tuple[Word, ...]:
    """All words of length <= level_cap, ordered by length then lexicographically."""
    out: list[Word] = []
    for n in range(level_cap + 1):
        out.extend(itertools.product(range(width), repeat=n))
    return tuple(out)


def _split(flat: np.ndarray, width: int, level_cap: int) -> list[np.ndarray]:
    offs = level_offsets(width, level_cap)
    return [flat[..., offs[n]:offs[n + 1]] for n in range(level_cap + 1)]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched tensor product of two homogeneous levels, flattened."""
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (a.shape[-1] * b.shape[-1],))


# --------------------------------------------------------------------------
# flat (batched) kernels


def unit_flat(width: int, level_cap: int, batch_shape=()) -> np.ndarray:
    out = np.zeros(tuple(batch_shape) + (tensor_dim(width, level_cap),))
    out[..., 0] = 1.0
    return out


def mul_flat(a: np.ndarray, b: np.ndarray, width: int, level_cap: int) -> np.ndarray:
    """Truncated product; level n is sum_k a^(k) (x) b^(n-k)."""
    la = _split(a, width, level_cap)
    lb = _split(b, width, level_cap)
    batch = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.empty(batch + (tensor_dim(width, level_cap),))
    offs = level_offsets(width, level_cap)
    for n in range(level_cap + 1):
        acc = np.zeros(batch + (width**n,))
        for k in range(n + 1):
            acc = acc + _outer(la[k], lb[n - k])
        out[..., offs[n]:offs[n + 1]] = acc
    return out


def exp_flat(a: np.ndarray, width: int, level_cap: int) -> np.ndarray:
    """Tensor exponential of an element with zero scalar part (Horner form)."""
    # exp(a) = 1 + a(1 + a/2(1 + a/3(...)))
    result = unit_flat(width, level_cap, a.shape[:-1])
    for k in range(level_cap, 0, -1):
        result = unit_flat(width, level_cap, a.shape[:-1]) + mul_flat(a, result, width, level_cap) / k
    return result


def log_flat(g: np.ndarray, width: int, level_cap: int) -> np.ndarray:
    """Truncated Mercator series log(1 + x), x = g - 1."""
    x = g.copy()
    x[..., 0] -= 1.0
    # log(1+x) = x(1 - x(1/2 - x(1/3 - ...)))  written as nested Horner sums
    acc = np.zeros_like(x)
    for k in range(level_cap, 0, -1):
        coef = (-1.0) ** (k + 1) / k
        term = unit_flat(width, level_cap, x.shape[:-1]) * coef
        acc = term + mul_flat(x, acc, width, level_cap) if k < level_cap else term
    return mul_flat(x, acc, width, level_cap)


def inverse_flat(g: np.ndarray, width: int, level_cap: int) -> np.ndarray:
    """Inverse in T_1: sum_k (-x)^k with x = g - 1."""
    x = g.copy()
    x[..., 0] -= 1.0
    result = unit_flat(width, level_cap, g.shape[:-1])
    for _ in range(level_cap):
        result = unit_flat(width, level_cap, g.shape[:-1]) - mul_flat(x, result, width, level_cap)
    return result


def segment_exp_flat(delta: np.ndarray, level_cap: int) -> np.ndarray:
    """exp of a pure level-1 element: level n is delta^{(x)n} / n!."""
    width = delta.shape[-1]
    out = np.empty(delta.shape[:-1] + (tensor_dim(width, level_cap),))
    offs = level_offsets(width, level_cap)
    cur = np.ones(delta.shape[:-1] + (1,))
    out[..., 0] = 1.0
    for n in range(1, level_cap + 1):
        cur = _outer(cur, delta) / n
        out[..., offs[n]:offs[n + 1]] = cur
    return out


def mul_segment_exp_flat(s: np.ndarray, delta: np.ndarray, level_cap: int) -> np.ndarray:
    """In-place ``s <- s (x) exp(delta)`` for a batch of prefix signatures.

    Uses the Horner scheme per level, highest level first so that lower
    levels are read before being overwritten.
    """
    width = delta.shape[-1]
    offs = level_offsets(width, level_cap)
    for n in range(level_cap, 0, -1):
        acc = s[..., 0:1] * (delta / n)
        for k in range(1, n):
            acc = _outer(acc + s[..., offs[k]:offs[k + 1]], delta) / (n - k)
        s[..., offs[n]:offs[n + 1]] += acc
    return s


# --------------------------------------------------------------------------
# shuffle product


@lru_cache(maxsize=200_000)
def _shuffle_cached(left: Word, right: Word) -> tuple[tuple[Word, int], ...]:
    if not left:
        return ((right, 1),)
    if not right:
        return ((left, 1),)
    out: Counter = Counter()
    for w, m in _shuffle_cached(left[:-1], right):
        out[w + (left[-1],)] += m
    for w, m in _shuffle_cached(left, right[:-1]):
        out[w + (right[-1],)] += m
    return tuple(sorted(out.items()))


def shuffle_words(left, right) -> dict[Word, int]:
    """Shuffle product of two words as a map word -> multiplicity.

    Follows the last-letter recursion; results are memoized when
    ``len(left) + len(right) <= 8``.
    """
    left, right = tuple(int(i) for i in left), tuple(int(j) for j in right)
    for letter in left + right:
        if letter < 0:
            raise DomainError(f"negative letter {letter}")
    if len(left) + len(right) <= 8:
        return dict(_shuffle_cached(left, right))
    return dict(_shuffle_cached.__wrapped__(left, right))


@lru_cache(maxsize=32)
def _shuffle_table(width: int, degree: int):
    """Pair indices and the sparse shuffle map for all unordered pairs |I|+|J| <= degree."""
    ws = words(width, degree)
    left_idx, right_idx = [], []
    rows, cols, vals = [], [], []
    n_pair = 0
    for i, u in enumerate(ws):
        for j in range(i, len(ws)):
            v = ws[j]
            if len(u) + len(v) > degree:
                continue
            for w, m in shuffle_words(u, v).items():
                rows.append(n_pair)
                cols.append(word_index(w, width))
                vals.append(float(m))
            left_idx.append(i)
            right_idx.append(j)
            n_pair += 1
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n_pair, len(ws)))
    return np.array(left_idx), np.array(right_idx), mat


def shuffle_defect_flat(g: np.ndarray, width: int, level_cap: int, degree: int) -> np.ndarray:
    """Max shuffle-identity defect per batch element, pairs with |I|+|J| <= degree."""
    if degree > level_cap:
        raise DomainError(f"pair degree {degree} exceeds level cap {level_cap}")
    li, ri, mat = _shuffle_table(width, degree)
    flat = g[..., : tensor_dim(width, degree)]
    batch = flat.shape[:-1]
    flat2 = flat.reshape(-1, flat.shape[-1])
    lhs = flat2[:, li] * flat2[:, ri]
    rhs = (mat @ flat2.T).T
    return np.abs(lhs - rhs).max(axis=1).reshape(batch)


# --------------------------------------------------------------------------
# value type


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """An element of T^N(R^width); ``data`` is the flat coefficient vector."""

    width: int
    level_cap: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.level_cap < 0:
            raise DimensionError("width must be >= 1 and level_cap >= 0")
        arr = np.array(self.data, dtype=np.float64)
        if arr.shape != (tensor_dim(self.width, self.level_cap),):
            raise DimensionError(
                f"expected {tensor_dim(self.width, self.level_cap)} coefficients, got shape {arr.shape}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def zero(cls, width: int, level_cap: int) -> TruncatedTensor:
        return cls(width, level_cap, np.zeros(tensor_dim(width, level_cap)))

    @classmethod
    def unit(cls, width: int, level_cap: int) -> TruncatedTensor:
        return cls(width, level_cap, unit_flat(width, level_cap))

    @classmethod
    def from_levels(cls, levels) -> TruncatedTensor:
        levels = [np.ravel(np.asarray(lv, dtype=np.float64)) for lv in levels]
        width = len(levels[1]) if len(levels) > 1 else 1
        return cls(width, len(levels) - 1, np.concatenate(levels))

    @classmethod
    def from_words(cls, width: int, level_cap: int, coeffs: dict) -> TruncatedTensor:
        data = np.zeros(tensor_dim(width, level_cap))
        for w, v in coeffs.items():
            if len(w) > level_cap:
                raise DimensionError(f"word {w} longer than level cap {level_cap}")
            data[word_index(w, width)] += v
        return cls(width, level_cap, data)

    @classmethod
    def letter(cls, vector, level_cap: int) -> TruncatedTensor:
        """Pure level-1 element with the given coordinates."""
        vector = np.asarray(vector, dtype=np.float64)
        data = np.zeros(tensor_dim(len(vector), level_cap))
        if level_cap >= 1:
            data[1 : 1 + len(vector)] = vector
        return cls(len(vector), level_cap, data)

    def level(self, n: int) -> np.ndarray:
        offs = level_offsets(self.width, self.level_cap)
        return self.data[offs[n]:offs[n + 1]]

    @property
    def levels(self) -> list[np.ndarray]:
        return [self.level(n) for n in range(self.level_cap + 1)]

    def __getitem__(self, word) -> float:
        word = tuple(word)
        if len(word) > self.level_cap:
            raise DimensionError(f"word {word} longer than level cap {self.level_cap}")
        return float(self.data[word_index(word, self.width)])

    def norm(self) -> float:
        """max over levels of the Euclidean norm of that level."""
        return max(float(np.linalg.norm(lv)) for lv in self.levels)

    def _check(self, other: TruncatedTensor):
        if not isinstance(other, TruncatedTensor):
            return NotImplemented
        if (self.width, self.level_cap) != (other.width, other.level_cap):
            raise DimensionError(
                f"shape mismatch: (width={self.width}, N={self.level_cap}) vs "
                f"(width={other.width}, N={other.level_cap})"
            )
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TruncatedTensor(self.width, self.level_cap, self.data + other.data)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TruncatedTensor(self.width, self.level_cap, self.data - other.data)

    def __neg__(self):
        return TruncatedTensor(self.width, self.level_cap, -self.data)

    def __mul__(self, scalar):
        if isinstance(scalar, TruncatedTensor):
            return NotImplemented
        return TruncatedTensor(self.width, self.level_cap, self.data * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return tensor_mul(self, other)

    def allclose(self, other: TruncatedTensor, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.data - other.data), initial=0.0) <= atol)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "level_cap": self.level_cap,
            "levels": [lv.tolist() for lv in self.levels],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> TruncatedTensor:
        width, cap = int(obj["width"]), int(obj["level_cap"])
        levels = obj["levels"]
        if len(levels) != cap + 1:
            raise DimensionError("levels list does not match level_cap")
        return cls(width, cap, np.concatenate([np.asarray(lv, dtype=np.float64).ravel() for lv in levels]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> TruncatedTensor:
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"TruncatedTensor(width={self.width}, level_cap={self.level_cap}, data={self.data!r})"


# --------------------------------------------------------------------------
# public operations


def tensor_add(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    return a + b


def tensor_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    a._check(b)
    return TruncatedTensor(a.width, a.level_cap, mul_flat(a.data, b.data, a.width, a.level_cap))


def tensor_exp(a: TruncatedTensor) -> TruncatedTensor:
    if a.data[0] != 0.0:
        raise DomainError("exp is defined on elements with zero scalar part")
    return TruncatedTensor(a.width, a.level_cap, exp_flat(a.data, a.width, a.level_cap))


def tensor_log(g: TruncatedTensor) -> TruncatedTensor:
    if g.data[0] != 1.0:
        raise DomainError("log is defined on elements with unit scalar part")
    return TruncatedTensor(g.width, g.level_cap, log_flat(g.data, g.width, g.level_cap))


def tensor_inverse(g: TruncatedTensor) -> TruncatedTensor:
    if g.data[0] != 1.0:
        raise DomainError("series inverse needs unit scalar part")
    return TruncatedTensor(g.width, g.level_cap, inverse_flat(g.data, g.width, g.level_cap))


@dataclass(frozen=True)
class GrouplikeCertificate:
    max_defect: float
    pairs_tested: int


def grouplike_defect(g: TruncatedTensor, max_pair_degree: int) -> GrouplikeCertificate:
    """Largest |<e_I,g><e_J,g> - <e_I sh e_J, g>| over pairs with |I|+|J| <= max_pair_degree."""
    if max_pair_degree > g.level_cap or max_pair_degree < 0:
        raise DomainError(f"max_pair_degree must lie in [0, {g.level_cap}]")
    defect = shuffle_defect_flat(g.data, g.width, g.level_cap, max_pair_degree)
    n_pairs = len(_shuffle_table(g.width, max_pair_degree)[0])
    return GrouplikeCertificate(float(defect), n_pairs)


def shuffle_exp_coefficients(vector, level_cap: int) -> TruncatedTensor:
    """Coefficients of sum_{k<=N} v^{sh k}/k! for a level-1 vector v.

    Paired with a group-like g this evaluates sum_k <v,g>^k / k!.  The
    shuffle power v^{sh k} equals k! times the symmetrised tensor power, so
    the coefficient of a word of length k is just the product of letters.
    """
    vector = np.asarray(vector, dtype=np.float64)
    return TruncatedTensor(len(vector), level_cap, segment_exp_flat(vector, level_cap) * _factorials(len(vector), level_cap))


def _factorials(width: int, level_cap: int) -> np.ndarray:
    offs = level_offsets(width, level_cap)
    out = np.empty(offs[-1])
    for n in range(level_cap + 1):
        out[offs[n]:offs[n + 1]] = 1.0 / math.factorial(n)
    return 1.0 / out
