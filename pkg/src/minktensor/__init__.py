"""Minkowski tensor estimation from point samples via randomised-grid Voronoi tensors."""
from .lsq import MinkowskiTensorSet, RadiusSchedule, estimate_minkowski, estimate_minkowski_many
from .spatial import ObservationWindow, PointCloud, ShiftedGrid
from .surface import SurfaceEstimate, estimate_surface_scalar_diff, estimate_surface_tensor
from .symtensor import SymTensor, rank2_spectrum
from .voronoi import VoronoiTensorSeries, estimate_series, estimate_series_multi

__all__ = [
    "MinkowskiTensorSet",
    "ObservationWindow",
    "PointCloud",
    "RadiusSchedule",
    "ShiftedGrid",
    "SurfaceEstimate",
    "SymTensor",
    "VoronoiTensorSeries",
    "estimate_minkowski",
    "estimate_minkowski_many",
    "estimate_series",
    "estimate_series_multi",
    "estimate_surface_scalar_diff",
    "estimate_surface_tensor",
    "rank2_spectrum",
]
