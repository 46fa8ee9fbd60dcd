"""Direct small-radius estimators of the surface tensors Phi_{d-1}^{r,s}."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .spatial import PointCloud
from .symtensor import SymTensor, kappa, stack_mean, trace2
from .voronoi import DEFAULT_CHUNK, estimate_series_multi


class CoarseGridWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceEstimate:
    tensor: SymTensor
    r: int
    s: int
    eps: float
    spacing: float
    seed: int | None
    stderr: SymTensor | None = None
    meta: dict = field(default_factory=dict)

    @property
    def trace_area(self) -> float | None:
        """4 pi tr(T); equals Phi^{0,0}_{d-1} when r = 0 and s = 2."""
        if self.r == 0 and self.s == 2:
            return surface_area_from_trace(self)
        return None

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "s": self.s,
            "eps": self.eps,
            "spacing": self.spacing,
            "seed": self.seed,
            "tensor": self.tensor.to_dict(),
            "stderr": None if self.stderr is None else self.stderr.to_dict(),
            "trace_area": self.trace_area,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SurfaceEstimate":
        se = doc.get("stderr")
        return cls(
            SymTensor.from_dict(doc["tensor"]), doc["r"], doc["s"], doc["eps"], doc["spacing"],
            doc.get("seed"), None if se is None else SymTensor.from_dict(se), dict(doc.get("meta", {})),
        )


def _seeds(seed, renditions):
    if renditions < 1:
        raise ValueError("renditions must be positive")
    if renditions == 1:
        return [seed]
    base = 0 if seed is None else seed
    return [base + i for i in range(renditions)]


def _average(cloud, r, s, eps, spacing, seed, renditions, build, meta):
    vals = [build(seed_i) for seed_i in _seeds(seed, renditions)]
    if renditions == 1:
        return SurfaceEstimate(vals[0], r, s, eps, spacing, seed, None, meta)
    mean, se = stack_mean(vals)
    return SurfaceEstimate(mean, r, s, eps, spacing, seed, se, meta)


def estimate_surface_tensor(
    cloud: PointCloud,
    r: int,
    s: int,
    eps: float,
    spacing: float,
    seed=None,
    rotate: bool = True,
    renditions: int = 1,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> SurfaceEstimate:
    """V_eps^{r,s} / (eps^{1+s} r! s! kappa_{s+1}) for s >= 1."""
    if s < 1:
        raise ValueError("s = 0 needs estimate_surface_scalar_diff")
    if eps <= 0 or spacing <= 0:
        raise ValueError("eps and the grid spacing must be positive")
    if eps <= spacing:
        raise ValueError("eps must exceed the grid spacing")
    if spacing > eps / 10:
        warnings.warn(f"grid spacing {spacing} is coarse relative to eps={eps}", CoarseGridWarning, stacklevel=2)
    norm = eps ** (1 + s) * math.factorial(r) * math.factorial(s) * kappa(s + 1)

    def one(seed_i):
        ser = estimate_series_multi(
            cloud, [eps], spacing, [(r, s)], seed=seed_i, rotate=rotate,
            chunk_size=chunk_size, workers=workers,
        )[(r, s)]
        return ser.tensors[0] / norm

    return _average(cloud, r, s, eps, spacing, seed, renditions, one, {"method": "single_radius"})


def estimate_surface_scalar_diff(
    cloud: PointCloud,
    r: int,
    eps: float,
    spacing: float,
    seed=None,
    rotate: bool = True,
    renditions: int = 1,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> SurfaceEstimate:
    """(V_eps - V_{eps^2}) / (2 r! eps) for s = 0, both radii on one grid."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if spacing <= 0:
        raise ValueError("grid spacing must be positive")
    if spacing > eps**2:
        raise ValueError(f"grid spacing {spacing} exceeds eps^2 = {eps**2}")
    norm = 2 * math.factorial(r) * eps

    def one(seed_i):
        ser = estimate_series_multi(
            cloud, [eps**2, eps], spacing, [(r, 0)], seed=seed_i, rotate=rotate,
            chunk_size=chunk_size, workers=workers,
        )[(r, 0)]
        return (ser.tensors[1] - ser.tensors[0]) / norm

    return _average(cloud, r, 0, eps, spacing, seed, renditions, one, {"method": "difference"})


def surface_area_from_trace(est) -> float:
    """4 pi tr(Phi^{0,2}_{d-1}); accepts a SurfaceEstimate or a rank-2 SymTensor."""
    if isinstance(est, SurfaceEstimate):
        if est.r != 0 or est.s != 2:
            raise ValueError("trace recovery needs r = 0 and s = 2")
        est = est.tensor
    if not isinstance(est, SymTensor) or est.rank != 2:
        raise ValueError("trace recovery needs a rank-2 tensor")
    return 4 * math.pi * trace2(est)


def default_eps(avg_nn: float) -> float:
    return 4.0 * avg_nn

