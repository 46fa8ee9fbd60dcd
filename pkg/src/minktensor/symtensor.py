"""Symmetric tensors on R^d stored by sorted multi-index.

A rank-p tensor T is kept as the values T(e_{i1},...,e_{ip}) for
1 <= i1 <= ... <= ip <= d, in the order produced by
``itertools.combinations_with_replacement``. Indices are 1-based
throughout the public API so that keys read like the usual ``T_{1,2}``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


def kappa_omega(n: int) -> tuple[float, float]:
    """Volume kappa_n of the unit n-ball and surface area omega_n = n*kappa_n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    kappa = math.pi ** (n / 2) / math.gamma(1 + n / 2)
    return kappa, n * kappa


def kappa(n: int) -> float:
    return kappa_omega(n)[0]


def omega(n: int) -> float:
    return kappa_omega(n)[1]


@lru_cache(maxsize=None)
def index_tuples(dim: int, rank: int) -> tuple[tuple[int, ...], ...]:
    """Sorted 1-based index tuples in canonical storage order."""
    return tuple(itertools.combinations_with_replacement(range(1, dim + 1), rank))


@lru_cache(maxsize=None)
def _position(dim: int, rank: int) -> dict[tuple[int, ...], int]:
    return {idx: k for k, idx in enumerate(index_tuples(dim, rank))}


def multinomial(idx: Sequence[int]) -> int:
    counts = {}
    for i in idx:
        counts[i] = counts.get(i, 0) + 1
    out = math.factorial(len(idx))
    for c in counts.values():
        out //= math.factorial(c)
    return out


@dataclass(frozen=True, eq=False)
class SymTensor:
    dim: int
    rank: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim < 1 or self.rank < 0:
            raise ValueError("need dim >= 1 and rank >= 0")
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != len(index_tuples(self.dim, self.rank)):
            raise ValueError(
                f"expected {len(index_tuples(self.dim, self.rank))} values, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("tensor entries must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, dim: int, rank: int) -> "SymTensor":
        return cls(dim, rank, np.zeros(len(index_tuples(dim, rank))))

    @classmethod
    def scalar(cls, value: float, dim: int) -> "SymTensor":
        return cls(dim, 0, np.array([float(value)]))

    @classmethod
    def from_entries(cls, dim: int, rank: int, entries: dict) -> "SymTensor":
        pos = _position(dim, rank)
        vals = np.zeros(len(pos))
        for key, v in entries.items():
            key = tuple(sorted(_as_index(key)))
            if key not in pos:
                raise KeyError(f"invalid index {key} for dim={dim}, rank={rank}")
            vals[pos[key]] = v
        return cls(dim, rank, vals)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SymTensor":
        """From a full (d,)*p array; the array is assumed symmetric."""
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 0:
            raise ValueError("use SymTensor.scalar for rank 0")
        dim = arr.shape[0]
        vals = [arr[tuple(i - 1 for i in idx)] for idx in index_tuples(dim, arr.ndim)]
        return cls(dim, arr.ndim, np.array(vals))

    @classmethod
    def from_coefficients(cls, dim: int, rank: int, coeffs: dict) -> "SymTensor":
        """Inverse of :func:`multiindex_coefficient` applied entrywise."""
        entries = {}
        for key, t in coeffs.items():
            key = tuple(sorted(_as_index(key)))
            entries[key] = t / multinomial(key)
        return cls.from_entries(dim, rank, entries)

    # access -------------------------------------------------------------
    @property
    def keys(self) -> tuple[tuple[int, ...], ...]:
        return index_tuples(self.dim, self.rank)

    @property
    def entries(self) -> dict[tuple[int, ...], float]:
        return dict(zip(self.keys, self.values.tolist()))

    def __getitem__(self, idx) -> float:
        idx = tuple(sorted(_as_index(idx)))
        try:
            return float(self.values[_position(self.dim, self.rank)[idx]])
        except KeyError:
            raise KeyError(f"invalid index {idx} for dim={self.dim}, rank={self.rank}") from None

    def to_array(self) -> np.ndarray:
        if self.rank == 0:
            return np.array(self.values[0])
        arr = np.empty((self.dim,) * self.rank)
        for idx, v in zip(self.keys, self.values):
            for perm in set(itertools.permutations(idx)):
                arr[tuple(i - 1 for i in perm)] = v
        return arr

    def matrix(self) -> np.ndarray:
        if self.rank != 2:
            raise ValueError("matrix() needs a rank-2 tensor")
        return self.to_array()

    def evaluate(self, *vectors) -> float:
        """T(x_1, ..., x_p) for vectors x_j in R^d."""
        if len(vectors) != self.rank:
            raise ValueError(f"need {self.rank} arguments")
        out = self.to_array()
        for x in vectors:
            out = np.tensordot(out, np.asarray(x, dtype=float), axes=([0], [0]))
        return float(out)

    def max_abs(self) -> float:
        """Largest absolute stored entry; used as a diagnostic seminorm."""
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "SymTensor"):
        if (self.dim, self.rank) != (other.dim, other.rank):
            raise ValueError("tensor shape mismatch")

    def __add__(self, other: "SymTensor") -> "SymTensor":
        self._check(other)
        return SymTensor(self.dim, self.rank, self.values + other.values)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        self._check(other)
        return SymTensor(self.dim, self.rank, self.values - other.values)

    def __neg__(self) -> "SymTensor":
        return SymTensor(self.dim, self.rank, -self.values)

    def __mul__(self, c: float) -> "SymTensor":
        return SymTensor(self.dim, self.rank, self.values * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "SymTensor":
        return SymTensor(self.dim, self.rank, self.values / float(c))

    def allclose(self, other: "SymTensor", rtol=1e-12, atol=1e-12) -> bool:
        return (self.dim, self.rank) == (other.dim, other.rank) and np.allclose(
            self.values, other.values, rtol=rtol, atol=atol
        )

    def __repr__(self):
        body = ", ".join(f"{k}: {v:.6g}" for k, v in self.entries.items())
        return f"SymTensor(dim={self.dim}, rank={self.rank}, {{{body}}})"

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "rank": self.rank,
            "entries": {",".join(map(str, k)): v for k, v in self.entries.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SymTensor":
        dim, rank = int(doc["dim"]), int(doc["rank"])
        entries = {}
        for key, v in doc["entries"].items():
            idx = tuple(int(s) for s in key.split(",")) if key else ()
            entries[idx] = float(v)
        return cls.from_entries(dim, rank, entries)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SymTensor":
        return cls.from_dict(json.loads(text))


def _as_index(idx) -> tuple[int, ...]:
    if isinstance(idx, (int, np.integer)):
        return (int(idx),)
    return tuple(int(i) for i in idx)


def multiindex_coefficient(T: SymTensor, idx) -> float:
    """Basis coefficient t_{i1..ip} = multinomial * T(e_i1, ..., e_ip)."""
    idx = tuple(sorted(_as_index(idx)))
    if len(idx) != T.rank or any(i < 1 or i > T.dim for i in idx):
        raise KeyError(f"invalid index {idx} for dim={T.dim}, rank={T.rank}")
    return multinomial(idx) * T[idx]


@lru_cache(maxsize=None)
def _splits(m: int, p: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """All ways to give p of the m slots to the first factor."""
    out = []
    for sub in itertools.combinations(range(m), p):
        rest = tuple(k for k in range(m) if k not in sub)
        out.append((sub, rest))
    return tuple(out)


def sym_product(A: SymTensor, B: SymTensor) -> SymTensor:
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} != {B.dim}")
    p, q = A.rank, B.rank
    m = p + q
    splits = _splits(m, p)
    vals = []
    for idx in index_tuples(A.dim, m):
        acc = 0.0
        for sa, sb in splits:
            acc += A[tuple(idx[k] for k in sa)] * B[tuple(idx[k] for k in sb)]
        vals.append(acc / len(splits))
    return SymTensor(A.dim, m, np.array(vals))


def tensor_power(v, p: int) -> SymTensor:
    v = np.asarray(v, dtype=float).reshape(-1)
    if p < 0:
        raise ValueError("p must be nonnegative")
    vals = [math.prod(v[i - 1] for i in idx) for idx in index_tuples(v.size, p)]
    return SymTensor(v.size, p, np.array(vals, dtype=float))


def metric_tensor(d: int) -> SymTensor:
    return SymTensor.from_entries(d, 2, {(i, i): 1.0 for i in range(1, d + 1)})


@lru_cache(maxsize=None)
def metric_power(d: int, m: int) -> SymTensor:
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return SymTensor.scalar(1.0, d)
    return sym_product(metric_power(d, m - 1), metric_tensor(d))


def sphere_moment(d: int, p: int) -> SymTensor:
    """Integral of u^p over the unit sphere S^{d-1}."""
    if d < 1:
        raise ValueError("d must be positive")
    if p % 2:
        return SymTensor.zeros(d, p)
    coeff = 2 * omega(d + p) / omega(p + 1)
    return metric_power(d, p // 2) * coeff


def trace2(T: SymTensor) -> float:
    if T.rank != 2:
        raise ValueError("trace2 needs a rank-2 tensor")
    return float(sum(T[(i, i)] for i in range(1, T.dim + 1)))


@dataclass(frozen=True)
class Rank2Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    anisotropy_ratio: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.T.tolist(),
            "anisotropy_ratio": self.anisotropy_ratio,
        }


def rank2_spectrum(T: SymTensor) -> Rank2Spectrum:
    """Eigenvalues sorted by |lambda| descending; ties by signed value descending."""
    if T.rank != 2:
        raise ValueError("rank2_spectrum needs a rank-2 tensor")
    w, V = np.linalg.eigh(T.matrix())
    order = sorted(range(len(w)), key=lambda k: (-abs(w[k]), -w[k]))
    w, V = w[order], V[:, order]
    top = abs(w[0])
    ratio = float(abs(w[-1]) / top) if top > 0 else 0.0
    return Rank2Spectrum(w, V, ratio)


def stack_mean(tensors: Iterable[SymTensor]) -> tuple[SymTensor, SymTensor]:
    """Entrywise mean and standard error (sample sd / sqrt(n))."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("no tensors to average")
    arr = np.stack([t.values for t in tensors])
    n = len(tensors)
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    t0 = tensors[0]
    return SymTensor(t0.dim, t0.rank, mean), SymTensor(t0.dim, t0.rank, se)
