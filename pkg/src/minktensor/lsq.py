"""Radial least-squares fit of Voronoi tensor series.

For a set of positive reach the Voronoi tensor is a polynomial in R,

    V_R^{r,s} = sum_j r! s! kappa_{j+s} R^{s+j} Phi_{d-j}^{r,s},

so fitting the estimated series at radii R_1..R_n recovers Phi_d..Phi_0.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .spatial import ObservationWindow, PointCloud, avg_nn_distance, window_max_radius
from .symtensor import SymTensor, kappa, stack_mean
from .voronoi import DEFAULT_CHUNK, estimate_series_multi

log = logging.getLogger(__name__)

MAX_CONDITION = 1e12
DEFAULT_N = 50


class RankDeficientSchedule(ValueError):
    """The radius schedule gives a numerically singular design matrix."""


class ReachWarning(UserWarning):
    """The fit is only exact for radii below the reach of the sampled set."""


class ScheduleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RadiusSchedule:
    n: int
    r1: float
    rn: float
    spacing: float
    renditions: int = 1
    seed: int = 0
    rotate: bool = True

    def __post_init__(self):
        if not (self.r1 > 0 and self.rn > self.r1):
            raise ValueError(f"need 0 < R_1 < R_n, got R_1={self.r1}, R_n={self.rn}")
        if self.n < 2:
            raise ValueError("a schedule needs at least two radii")
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.renditions < 1:
            raise ValueError("renditions must be positive")

    @property
    def radii(self) -> np.ndarray:
        return np.linspace(self.r1, self.rn, self.n)

    @property
    def gap(self) -> float:
        return (self.rn - self.r1) / (self.n - 1)

    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.renditions)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def for_cloud(
        cls,
        cloud: PointCloud,
        n: int = DEFAULT_N,
        rmax: float | None = None,
        window: ObservationWindow | None = None,
        spacing: float | None = None,
        r1: float | None = None,
        renditions: int = 1,
        seed: int = 0,
        rotate: bool = True,
    ) -> "RadiusSchedule":
        """Defaults: R_1 = av(K0), a = av(K0), R_n from rmax, a window, or (d+1) av(K0)."""
        if rmax is not None and window is not None:
            raise ValueError("give either rmax or a window, not both")
        av = avg_nn_distance(cloud)
        if r1 is None:
            r1 = av
        if rmax is not None:
            rn = float(rmax)
        elif window is not None:
            rn = window_max_radius(cloud, window)
        else:
            rn = (cloud.dim + 1) * av
            warnings.warn(
                f"no R_n given, using (d+1)*av = {rn:.4g}; the fit assumes R_n below the reach",
                ReachWarning,
                stacklevel=2,
            )
        sched = cls(n, float(r1), rn, float(spacing if spacing is not None else av),
                    renditions, seed, rotate)
        if sched.gap < av * (1 - 1e-9):
            warnings.warn(
                f"radius gap {sched.gap:.4g} is below the mean nearest-neighbour distance {av:.4g}",
                ScheduleWarning,
                stacklevel=2,
            )
        return sched


def build_design_matrix(radii, d: int, s: int, r: int = 0, drop_volume: bool | None = None) -> np.ndarray:
    """Rows R_i, column j multiplying Phi_{d-j}; column 0 dropped when s >= 1."""
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if drop_volume is None:
        drop_volume = s >= 1
    if s >= 1 and not drop_volume:
        raise ValueError("the volume column must be dropped when s >= 1")
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if len(np.unique(radii)) != radii.size:
        raise RankDeficientSchedule("radius schedule contains duplicate radii")
    need = d if drop_volume else d + 1
    if radii.size < need:
        raise RankDeficientSchedule(f"need at least {need} radii, got {radii.size}")
    c = math.factorial(r) * math.factorial(s)
    cols = [c * kappa(j + s) * radii ** (s + j) for j in range(d + 1)]
    X = np.stack(cols, axis=1)
    return X[:, 1:] if drop_volume else X


@dataclass(frozen=True)
class LstsqResult:
    coef: np.ndarray
    residual_norm: np.ndarray
    condition: float


def lsq_solve(X: np.ndarray, y: np.ndarray) -> LstsqResult:
    """Least squares by column-pivoted QR on the column-scaled matrix.

    ``y`` may hold several right-hand sides as columns.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    vec = y.ndim == 1
    Y = y.reshape(len(y), -1)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise RankDeficientSchedule("design matrix has a zero column; check the radius schedule")
    Xs = X / norms
    cond = float(np.linalg.cond(Xs))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise RankDeficientSchedule(
            f"design matrix condition {cond:.3g} exceeds {MAX_CONDITION:.0e}; "
            "the radius schedule is too narrow or has too few distinct radii"
        )
    Qm, Rm, perm = scipy.linalg.qr(Xs, mode="economic", pivoting=True)
    z = scipy.linalg.solve_triangular(Rm, Qm.T @ Y)
    b = np.empty_like(z)
    b[perm] = z
    b /= norms[:, None]
    res = np.linalg.norm(Y - X @ b, axis=0)
    if vec:
        return LstsqResult(b[:, 0], res[0], cond)
    return LstsqResult(b, res, cond)


def fit_series(radii, values, d: int, r: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Fit a series (n_radii, n_entries) and return (coef rows Phi_d..Phi_0, residuals).

    With s >= 1 the Phi_d row is zero.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    X = build_design_matrix(radii, d, s, r)
    sol = lsq_solve(X, values)
    coef = sol.coef
    if s >= 1:
        coef = np.vstack([np.zeros((1, coef.shape[1])), coef])
    resid = values - X @ sol.coef
    return coef, resid


@dataclass(frozen=True, eq=False)
class MinkowskiTensorSet:
    """Estimates Phi_d..Phi_0 (list index j holds Phi_{d-j}) with standard errors."""

    d: int
    r: int
    s: int
    phi: list[SymTensor]
    stderr: list[SymTensor]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.phi) != self.d + 1 or len(self.stderr) != self.d + 1:
            raise ValueError("need d+1 tensors and standard errors")

    def __getitem__(self, k: int) -> SymTensor:
        """Phi_k."""
        if not 0 <= k <= self.d:
            raise IndexError(f"k must lie in 0..{self.d}")
        return self.phi[self.d - k]

    def se(self, k: int) -> SymTensor:
        if not 0 <= k <= self.d:
            raise IndexError(f"k must lie in 0..{self.d}")
        return self.stderr[self.d - k]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "r": self.r,
            "s": self.s,
            "phi": [
                {"k": self.d - j, "tensor": t.to_dict(), "stderr": e.to_dict()}
                for j, (t, e) in enumerate(zip(self.phi, self.stderr))
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MinkowskiTensorSet":
        items = sorted(doc["phi"], key=lambda e: -e["k"])
        return cls(
            doc["d"], doc["r"], doc["s"],
            [SymTensor.from_dict(e["tensor"]) for e in items],
            [SymTensor.from_dict(e["stderr"]) for e in items],
            dict(doc.get("meta", {})),
        )


def _check_cloud(cloud: PointCloud, schedule: RadiusSchedule, rs):
    if len(cloud) < 2:
        raise ValueError("cloud too small: need at least two points")
    for r, s in rs:
        if r < 0 or s < 0:
            raise ValueError("r and s must be nonnegative")
        need = cloud.dim if s >= 1 else cloud.dim + 1
        if schedule.n < need:
            raise RankDeficientSchedule(f"n={schedule.n} radii cannot determine {need} coefficients")


def estimate_minkowski_many(
    cloud: PointCloud,
    rs: Sequence[tuple[int, int]],
    schedule: RadiusSchedule,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    series_sink=None,
) -> dict[tuple[int, int], MinkowskiTensorSet]:
    """All requested (r, s) from one nearest-neighbour pass per rendition.

    ``series_sink``, if given, is called with each rendition's dict of
    VoronoiTensorSeries before fitting.
    """
    rs = list(dict.fromkeys((int(r), int(s)) for r, s in rs))
    _check_cloud(cloud, schedule, rs)
    d = cloud.dim
    radii = schedule.radii
    per_rendition = {key: [] for key in rs}
    resid_sq = {key: np.zeros(radii.size) for key in rs}
    grid_counts = []
    t0 = time.perf_counter()
    for seed in schedule.seeds():
        series = estimate_series_multi(
            cloud, radii, schedule.spacing, rs, seed=seed, rotate=schedule.rotate,
            chunk_size=chunk_size, workers=workers,
        )
        if series_sink is not None:
            series_sink(series)
        grid_counts.append(next(iter(series.values())).n_grid_points)
        for (r, s), ser in series.items():
            coef, resid = fit_series(radii, ser.values(), d, r, s)
            per_rendition[(r, s)].append(coef)
            resid_sq[(r, s)] += np.mean(resid**2, axis=1)
        log.debug("rendition seed=%d done after %.1fs", seed, time.perf_counter() - t0)
    out = {}
    for (r, s), coefs in per_rendition.items():
        phi, se = [], []
        for j in range(d + 1):
            mean, err = stack_mean(SymTensor(d, r + s, c[j]) for c in coefs)
            phi.append(mean)
            se.append(err)
        rms = np.sqrt(resid_sq[(r, s)] / schedule.renditions)
        out[(r, s)] = MinkowskiTensorSet(
            d, r, s, phi, se,
            meta={
                "schedule": schedule.to_dict(),
                "radii": radii.tolist(),
                "seeds": schedule.seeds(),
                "grid_points": grid_counts,
                "fit_rms_residual_per_radius": rms.tolist(),
            },
        )
    return out


def estimate_minkowski(
    cloud: PointCloud,
    r: int,
    s: int,
    schedule: RadiusSchedule,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> MinkowskiTensorSet:
    return estimate_minkowski_many(cloud, [(r, s)], schedule, workers, chunk_size)[(r, s)]
