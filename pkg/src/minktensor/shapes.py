"""Parametric test shapes with closed membership tests.

Every shape exposes ``dim``, ``bounds()`` (axis-aligned bounding box) and
``contains(points, tol)``. Membership is closed: boundary points count.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Box:
    sides: tuple[float, ...]
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        sides = tuple(float(s) for s in self.sides)
        if any(s <= 0 for s in sides):
            raise ValueError("box sides must be positive")
        object.__setattr__(self, "sides", sides)
        c = (0.0,) * len(sides) if self.center is None else tuple(float(x) for x in self.center)
        if len(c) != len(sides):
            raise ValueError("center has wrong dimension")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return len(self.sides)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.sides) / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.sides) / 2

    def bounds(self):
        return self.lower, self.upper

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)


@dataclass(frozen=True)
class Shell:
    rho1: float
    rho2: float
    d: int = 2

    def __post_init__(self):
        if not 0 <= self.rho1 < self.rho2:
            raise ValueError("need 0 <= rho1 < rho2")

    @property
    def dim(self) -> int:
        return self.d

    def bounds(self):
        return np.full(self.d, -self.rho2), np.full(self.d, self.rho2)

    def contains(self, pts, tol=0.0):
        r = np.linalg.norm(np.atleast_2d(pts), axis=1)
        return (r >= self.rho1 - tol) & (r <= self.rho2 + tol)


@dataclass(frozen=True)
class CutBox:
    """Outer box with the open inner box removed, both centred at the origin."""

    inner: tuple[float, float]
    outer: tuple[float, float]

    def __post_init__(self):
        if len(self.inner) != len(self.outer):
            raise ValueError("inner/outer dimension mismatch")
        if not all(0 < a < b for a, b in zip(self.inner, self.outer)):
            raise ValueError("need 0 < inner_i < outer_i")

    @property
    def dim(self) -> int:
        return len(self.outer)

    def bounds(self):
        h = np.asarray(self.outer, dtype=float) / 2
        return -h, h

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        ho = np.asarray(self.outer, dtype=float) / 2
        hi = np.asarray(self.inner, dtype=float) / 2
        in_outer = np.all(np.abs(pts) <= ho + tol, axis=1)
        in_hole = np.all(np.abs(pts) < hi - tol, axis=1)
        return in_outer & ~in_hole


@dataclass(frozen=True)
class RoundedBox:
    """Parallel set of a centred box: points within distance r0 of it."""

    sides: tuple[float, ...]
    r0: float

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")

    @property
    def dim(self) -> int:
        return len(self.sides)

    def bounds(self):
        h = np.asarray(self.sides, dtype=float) / 2 + self.r0
        return -h, h

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        h = np.asarray(self.sides, dtype=float) / 2
        excess = np.maximum(np.abs(pts) - h, 0.0)
        return np.linalg.norm(excess, axis=1) <= self.r0 + tol


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a vertex list (any dimension supported by qhull)."""

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < v.shape[1] + 1:
            raise ValueError("polytope needs at least d+1 vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @cached_property
    def hull(self):
        from scipy.spatial import ConvexHull

        return ConvexHull(self.vertices)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        eq = self.hull.equations  # outward normals, n.x + c <= 0 inside
        out = np.ones(len(pts), dtype=bool)
        for row in eq:
            out &= pts @ row[:-1] + row[-1] <= tol
        return out

    @property
    def volume(self) -> float:
        return float(self.hull.volume)

    @property
    def surface(self) -> float:
        return float(self.hull.area)


ShapeSpec = Box | Shell | CutBox | RoundedBox | Polytope
