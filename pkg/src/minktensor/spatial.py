"""Point clouds, exact nearest neighbours and randomly shifted lattices."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np
from scipy.spatial import cKDTree

BRUTE_FORCE_BELOW = 64
DEFAULT_CHUNK = 1 << 18


class DegenerateCloudWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @cached_property
    def frame(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(center, basis) of the principal axes, or None to keep the input axes.

        Only used to speed up the kd-tree on tilted flat data, so the input
        axes are kept whenever the covariance spectrum is (nearly) degenerate.
        """
        if len(self) < BRUTE_FORCE_BELOW or self.dim == 1:
            return None
        center = self.points.mean(axis=0)
        w, V = np.linalg.eigh(np.cov(self.points - center, rowvar=False))
        if np.allclose(np.abs(V), np.eye(self.dim), atol=1e-9):
            return None
        gaps = np.diff(w) / max(w[-1], 1e-300)
        if np.any(gaps < 1e-3):
            return None
        return center, V

    def _to_frame(self, q: np.ndarray) -> np.ndarray:
        if self.frame is None:
            return q
        center, V = self.frame
        return (q - center) @ V

    @cached_property
    def tree(self) -> cKDTree:
        """kd-tree over the points, expressed in :attr:`frame` coordinates."""
        return cKDTree(self._to_frame(self.points))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def query(self, q: np.ndarray, upper_bound: float = np.inf, workers: int = 1):
        """Distances and indices of nearest points for many queries.

        Queries farther than ``upper_bound`` get distance ``inf`` and
        index ``len(self)``, as in :meth:`scipy.spatial.cKDTree.query`.
        """
        q = np.asarray(q, dtype=float)
        if len(self) < BRUTE_FORCE_BELOW:
            diff = q[:, None, :] - self.points[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            idx = np.argmin(d2, axis=1)
            dist = np.sqrt(d2[np.arange(len(q)), idx])
            far = dist >= upper_bound
            dist[far] = np.inf
            idx[far] = len(self)
            return dist, idx
        return self.tree.query(
            self._to_frame(q), k=1, distance_upper_bound=upper_bound, workers=workers
        )


def nearest(cloud: PointCloud, q) -> tuple[np.ndarray, float]:
    """Nearest point of the cloud; ties go to the smallest point index."""
    q = np.asarray(q, dtype=float).reshape(1, -1)
    if q.shape[1] != cloud.dim:
        raise ValueError("query has wrong dimension")
    dist, idx = cloud.query(q)
    dist, idx = float(dist[0]), int(idx[0])
    if len(cloud) >= BRUTE_FORCE_BELOW:
        ties = cloud.tree.query_ball_point(cloud._to_frame(q)[0], dist * (1 + 1e-12) + 1e-300)
        cand = [i for i in ties if np.linalg.norm(cloud.points[i] - q[0]) == dist]
        if cand:
            idx = min(cand)
    return cloud.points[idx].copy(), dist


def _nn_distances(cloud: PointCloud) -> np.ndarray:
    if len(cloud) < 2:
        raise ValueError("need at least two points")
    dist, _ = cloud.tree.query(cloud.tree.data, k=2)
    return dist[:, 1]


def avg_nn_distance(cloud: PointCloud) -> float:
    """Mean distance from each point to its nearest other point."""
    return float(np.mean(_nn_distances(cloud)))


def min_pairwise_distance(cloud: PointCloud) -> float:
    m = float(np.min(_nn_distances(cloud)))
    if m == 0.0:
        warnings.warn("point cloud contains duplicated points", DegenerateCloudWarning)
    return m


@dataclass(frozen=True)
class ObservationWindow:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("window bounds have different lengths")
        if not all(a < b for a, b in zip(self.lower, self.upper)):
            raise ValueError("window needs a_i < b_i on every axis")

    @classmethod
    def from_flat(cls, vals) -> "ObservationWindow":
        """From ``a1,b1,a2,b2,...`` as used on the command line."""
        vals = [float(v) for v in vals]
        if len(vals) % 2:
            raise ValueError("window needs an even number of values")
        return cls(tuple(vals[0::2]), tuple(vals[1::2]))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)


def window_max_radius(cloud: PointCloud, W: ObservationWindow) -> float:
    """Smallest distance of the data to a face of the window."""
    if len(W.lower) != cloud.dim:
        raise ValueError("window dimension does not match the cloud")
    if not np.all(W.contains(cloud.points)):
        raise ValueError("point outside the observation window")
    lo, hi = cloud.bounds()
    return float(min(np.min(np.asarray(W.upper) - hi), np.min(lo - np.asarray(W.lower))))


def haar_rotation(d: int, seed=None) -> np.ndarray:
    """Uniformly distributed matrix in SO(d)."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, d))
    Qm, Rm = np.linalg.qr(G)
    Qm = Qm * np.sign(np.diag(Rm))
    if np.linalg.det(Qm) < 0:
        Qm[:, 0] = -Qm[:, 0]
    return Qm


@dataclass(frozen=True, eq=False)
class ShiftedGrid:
    """The lattice rotation @ (a*Z^d + shift) with shift in [0, a)^d."""

    spacing: float
    shift: np.ndarray
    rotation: np.ndarray | None = None

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        shift = np.asarray(self.shift, dtype=float).reshape(-1)
        if np.any(shift < 0) or np.any(shift >= self.spacing):
            raise ValueError("shift must lie in [0, a)^d")
        object.__setattr__(self, "shift", shift)
        if self.rotation is not None:
            R = np.asarray(self.rotation, dtype=float)
            if np.max(np.abs(R.T @ R - np.eye(len(shift)))) > 1e-12:
                raise ValueError("rotation is not orthogonal")
            object.__setattr__(self, "rotation", R)

    @property
    def dim(self) -> int:
        return self.shift.size

    @classmethod
    def draw(cls, d: int, spacing: float, seed=None, rotate: bool = False) -> "ShiftedGrid":
        rng = np.random.default_rng(seed)
        rot = haar_rotation(d, rng) if rotate else None
        shift = rng.uniform(0.0, spacing, size=d)
        return cls(spacing, shift, rot)


def shifted_grid_stream(
    grid: ShiftedGrid, lower, upper, chunk_size: int = DEFAULT_CHUNK
) -> Iterator[np.ndarray]:
    """Grid points inside the box [lower, upper], lexicographic in the lattice index.

    Concatenating the yielded arrays gives the same sequence for every
    ``chunk_size``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    a, U, R = grid.spacing, grid.shift, grid.rotation
    if R is None:
        lo_pre, hi_pre = lower, upper
    else:
        # bounding box of the region pulled back through the rotation
        corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(grid.dim, -1).T
        back = corners @ R
        lo_pre, hi_pre = back.min(axis=0), back.max(axis=0)
    zlo = np.ceil((lo_pre - U) / a).astype(np.int64)
    zhi = np.floor((hi_pre - U) / a).astype(np.int64)
    shape = np.maximum(zhi - zlo + 1, 0)
    total = int(np.prod(shape))
    for start in range(0, total, chunk_size):
        flat = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        z = np.stack(np.unravel_index(flat, tuple(shape)), axis=1) + zlo
        x = z * a + U
        if R is not None:
            x = x @ R.T
        keep = np.all((x >= lower) & (x <= upper), axis=1)
        yield x[keep]


def estimation_region(cloud: PointCloud, r_max: float, spacing: float):
    """Bounding box of the cloud inflated by r_max + sqrt(d)*a."""
    lo, hi = cloud.bounds()
    pad = r_max + math.sqrt(cloud.dim) * spacing
    return lo - pad, hi + pad


def lattice_points(lower, upper, a: float, chunk_rows: int = 1 << 20) -> Iterator[np.ndarray]:
    """Points of a*Z^d inside [lower, upper] (with a tiny tolerance), in slabs."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    tol = 1e-9 * a
    zlo = np.ceil((lower - tol) / a).astype(np.int64)
    zhi = np.floor((upper + tol) / a).astype(np.int64)
    shape = np.maximum(zhi - zlo + 1, 0)
    total = int(np.prod(shape))
    for start in range(0, total, chunk_rows):
        flat = np.arange(start, min(start + chunk_rows, total), dtype=np.int64)
        z = np.stack(np.unravel_index(flat, tuple(shape)), axis=1) + zlo
        yield z * a


def grid_intersect_shape(shape, a: float) -> PointCloud:
    """All points of a*Z^d lying in the (closed) shape."""
    if a <= 0:
        raise ValueError("grid spacing must be positive")
    if not hasattr(shape, "contains") or not hasattr(shape, "bounds"):
        raise TypeError(f"unsupported shape {shape!r}")
    lo, hi = shape.bounds()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("shape is unbounded")
    tol = 1e-9 * a
    parts = [x[shape.contains(x, tol)] for x in lattice_points(lo, hi, a)]
    pts = np.concatenate(parts) if parts else np.empty((0, len(lo)))
    return PointCloud(pts)
