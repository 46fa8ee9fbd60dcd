"""Exact Minkowski tensors of simple shapes and beta-polytope expectations."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .lsq import MinkowskiTensorSet
from .shapes import Box, Shell
from .symtensor import (
    SymTensor,
    index_tuples,
    kappa,
    metric_power,
    omega,
    sphere_moment,
    sym_product,
)

# ---------------------------------------------------------------------------
# boxes


def _interval_moment(lo: float, hi: float, p: int) -> float:
    return (hi ** (p + 1) - lo ** (p + 1)) / (p + 1)


def _exponents(idx, d: int) -> list[int]:
    alpha = [0] * d
    for i in idx:
        alpha[i - 1] += 1
    return alpha


def _orthant_moment(alpha: list[int], signs: dict[int, int], d: int) -> float:
    """Integral of prod u_i^alpha_i over one orthant of the unit sphere in the
    coordinates listed in ``signs`` (all other u_i vanish)."""
    if any(alpha[i] for i in range(d) if i not in signs):
        return 0.0
    m = len(signs)
    sub = [alpha[i] for i in signs]
    log_full = math.log(2) + sum(math.lgamma((a + 1) / 2) for a in sub) - math.lgamma((sum(sub) + m) / 2)
    sign = math.prod(signs[i] ** alpha[i] for i in signs)
    return sign * math.exp(log_full) / 2**m


def _face_tensor(lo, hi, free: tuple[int, ...], fixed: dict[int, float], r: int) -> SymTensor:
    """Integral of x^r over the face with free coordinates ``free`` and the
    other coordinates pinned to ``fixed``."""
    d = len(lo)
    vals = []
    for idx in index_tuples(d, r):
        alpha = _exponents(idx, d)
        v = 1.0
        for i in range(d):
            if i in fixed:
                v *= fixed[i] ** alpha[i]
            else:
                v *= _interval_moment(lo[i], hi[i], alpha[i])
        vals.append(v)
    return SymTensor(d, r, np.array(vals))


def _cone_tensor(signs: dict[int, int], d: int, s: int) -> SymTensor:
    vals = [_orthant_moment(_exponents(idx, d), signs, d) for idx in index_tuples(d, s)]
    return SymTensor(d, s, np.array(vals))


def box_tensor(sides, k: int, r: int, s: int, center=None) -> SymTensor:
    """Phi_k^{r,s} of an axis-parallel box by summing over its k-faces."""
    box = Box(tuple(sides), None if center is None else tuple(center))
    d = box.dim
    if not 0 <= k <= d:
        raise ValueError(f"k must lie in 0..{d}")
    if r < 0 or s < 0:
        raise ValueError("r and s must be nonnegative")
    lo, hi = box.lower, box.upper
    if k == d:
        if s:
            return SymTensor.zeros(d, r + s)
        return _face_tensor(lo, hi, tuple(range(d)), {}, r) / math.factorial(r)
    total = SymTensor.zeros(d, r + s)
    for free in itertools.combinations(range(d), k):
        pinned = [i for i in range(d) if i not in free]
        for sg in itertools.product((-1, 1), repeat=len(pinned)):
            signs = dict(zip(pinned, sg))
            fixed = {i: (hi[i] if signs[i] > 0 else lo[i]) for i in pinned}
            A = _face_tensor(lo, hi, free, fixed, r)
            B = _cone_tensor(signs, d, s)
            total = total + sym_product(A, B)
    return total / (math.factorial(r) * math.factorial(s) * omega(d - k + s))


def box_minkowski(sides, r: int = 0, s: int = 0, center=None) -> MinkowskiTensorSet:
    """Exact Phi_d..Phi_0 of a box as a set with zero standard errors."""
    d = len(sides)
    phi = [box_tensor(sides, d - j, r, s, center) for j in range(d + 1)]
    zeros = [SymTensor.zeros(d, r + s) for _ in phi]
    return MinkowskiTensorSet(d, r, s, phi, zeros, meta={"oracle": "box", "sides": list(sides)})


# ---------------------------------------------------------------------------
# spherical shells


def shell_minkowski(d: int, rho1: float, rho2: float, k: int, r: int, s: int) -> SymTensor:
    Shell(rho1, rho2, d)  # validates radii
    if not 0 <= k <= d:
        raise ValueError(f"k must lie in 0..{d}")
    if k == d:
        if s:
            return SymTensor.zeros(d, r + s)
        radial = (rho2 ** (r + d) - rho1 ** (r + d)) / (r + d)
        return sphere_moment(d, r) * (radial / math.factorial(r))
    if (r + s) % 2:
        return SymTensor.zeros(d, r + s)
    coeff = (
        math.comb(d - 1, k) * 2 * omega(d + r + s)
        / (math.factorial(r) * math.factorial(s) * omega(d - k + s) * omega(r + s + 1))
    )
    radial = rho2 ** (r + k)
    if rho1 > 0:  # a solid ball has no inner sphere
        radial += (-1) ** (s + d - 1 - k) * rho1 ** (r + k)
    return metric_power(d, (r + s) // 2) * (coeff * radial)


def shell_minkowski_set(d: int, rho1: float, rho2: float, r: int, s: int) -> MinkowskiTensorSet:
    phi = [shell_minkowski(d, rho1, rho2, d - j, r, s) for j in range(d + 1)]
    zeros = [SymTensor.zeros(d, r + s) for _ in phi]
    return MinkowskiTensorSet(d, r, s, phi, zeros, meta={"oracle": "shell", "rho": [rho1, rho2]})


# ---------------------------------------------------------------------------
# boxes with a rectangular hole, rounded boxes


def cut_box_surface(a, b, r: int, s: int) -> SymTensor:
    """Phi_1^{r,s} of the outer box b with the open centred box a removed."""
    if len(a) != 2 or len(b) != 2:
        raise ValueError("cut boxes are two-dimensional")
    if not all(0 < ai < bi for ai, bi in zip(a, b)):
        raise ValueError("need 0 < a_i < b_i")
    return box_tensor(b, 1, r, s) + box_tensor(a, 1, r, s) * (-1) ** s


ROUNDED_BOX_FUNCTIONALS = ((0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 0, 2))


def rounded_box_2d(a1: float, a2: float, r0: float, which: tuple[int, int, int]) -> SymTensor:
    """Phi_k^{0,s} of the r0-parallel set of the centred a1 x a2 rectangle.

    ``which`` is (k, r, s) and must be one of ROUNDED_BOX_FUNCTIONALS.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    which = tuple(which)
    if which == (0, 0, 0):
        return SymTensor.scalar(1.0, 2)
    if which == (1, 0, 0):
        return SymTensor.scalar(a1 + a2 + math.pi * r0, 2)
    if which == (2, 0, 0):
        return SymTensor.scalar(a1 * a2 + 2 * (a1 + a2) * r0 + math.pi * r0**2, 2)
    if which == (1, 0, 2):
        return SymTensor.from_entries(2, 2, {
            (1, 1): a2 / (4 * math.pi) + r0 / 8,
            (2, 2): a1 / (4 * math.pi) + r0 / 8,
        })
    raise ValueError(f"unsupported functional {which}; choose from {ROUNDED_BOX_FUNCTIONALS}")


# ---------------------------------------------------------------------------
# neighbourhood volumes of convex bodies


def intrinsic_volumes(body) -> np.ndarray:
    """V_0..V_d of a box or a ball (a Shell with rho1 = 0)."""
    if isinstance(body, Box):
        sides = body.sides
        d = len(sides)
        return np.array([
            sum(math.prod(c) for c in itertools.combinations(sides, j)) for j in range(d + 1)
        ])
    if isinstance(body, Shell) and body.rho1 == 0:
        d, rho = body.d, body.rho2
        return np.array([math.comb(d, j) * kappa(d) / kappa(d - j) * rho**j for j in range(d + 1)])
    raise TypeError(f"no Steiner polynomial for {body!r}")


def steiner_voronoi_series(body, radii) -> np.ndarray:
    """Volume of the R-neighbourhood for each radius: sum_j kappa_{d-j} R^{d-j} V_j."""
    V = intrinsic_volumes(body)
    d = len(V) - 1
    R = np.asarray(radii, dtype=float)
    return sum(kappa(d - j) * R ** (d - j) * V[j] for j in range(d + 1))


# ---------------------------------------------------------------------------
# beta-polytopes


@dataclass(frozen=True)
class BetaPolytopeSpec:
    d: int
    l: int
    beta: float
    seed: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.l < self.d + 1:
            raise ValueError("need at least d+1 points")
        if not self.beta > -1:
            raise ValueError("beta must exceed -1")

    @property
    def normalizer(self) -> float:
        """c_{d,beta} making (1-|x|^2)^beta a probability density on the ball."""
        d, b = self.d, self.beta
        return math.exp(math.lgamma(d / 2 + b + 1) - d / 2 * math.log(math.pi) - math.lgamma(b + 1))


def sample_beta_points(d: int, l: int, beta: float, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    g = rng.standard_normal((l, d))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    rho = np.sqrt(rng.beta(d / 2, beta + 1, size=l))
    return u * rho[:, None]


def sample_beta_polytope(spec: BetaPolytopeSpec) -> np.ndarray:
    """The l i.i.d. points whose convex hull is the beta-polytope."""
    return sample_beta_points(spec.d, spec.l, spec.beta, spec.seed)


class QuadratureError(RuntimeError):
    pass


def _beta_surface_closed(l: int, beta: float) -> float | None:
    if beta == -0.5:
        return math.pi * (l - 1) / (l + 1)
    if beta == 0.5:
        total = sum(math.comb(l - 2, j) / math.comb(2 * l + j + 3, j + 3) * 2.0**j for j in range(l - 1))
        return 9 * math.pi * (l - 1) * total
    return None


@lru_cache(maxsize=256)
def beta_expected_surface_quad(d: int, l: int, beta: float) -> float:
    """E V_{d-1} of the beta-polytope by one-dimensional quadrature."""
    BetaPolytopeSpec(d, l, beta)
    gam = beta + (d - 1) / 2
    log_pref = (
        math.log(d * (2 * beta + d + 1)) - d * math.log(2) - math.lgamma(d / 2)
        + math.log(math.comb(l, d))
        + d * (math.lgamma(beta + (d + 2) / 2) - math.lgamma(beta + (d + 3) / 2))
    )
    power = d * beta + (d - 1) * (d + 2) / 2

    def integrand(h):
        F = special.betainc(gam + 1, gam + 1, (1 + h) / 2)
        return (1 - h * h) ** power * F ** (l - d)

    val, err = integrate.quad(integrand, -1, 1, epsabs=1e-13, epsrel=1e-12, limit=500)
    if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature did not converge (estimate {val}, error {err})")
    return math.exp(log_pref) * val


def beta_expected_surface(d: int, l: int, beta: float) -> float:
    """E V_{d-1}(P^beta_{l,d}); closed forms for d = 2 and beta = +-1/2."""
    BetaPolytopeSpec(d, l, beta)
    if d == 2:
        closed = _beta_surface_closed(l, beta)
        if closed is not None:
            return closed
    return beta_expected_surface_quad(d, l, beta)


def beta_expected_intrinsic(d: int, k: int, l: int, beta: float) -> float:
    """E V_k(P^beta_{l,d}) for k < d, reduced to a surface expectation in dimension k+1."""
    BetaPolytopeSpec(d, l, beta)
    if not 0 <= k < d:
        raise ValueError(
            "expected volumes (k = d) have no closed form here; use beta_expected_volume_mc"
        )
    if k == d - 1:
        return beta_expected_surface(d, l, beta)
    ratio = (math.comb(d, k) * kappa(d) / kappa(d - k)) / ((k + 1) * kappa(k + 1) / kappa(1))
    return ratio * beta_expected_surface(k + 1, l, beta + (d - k - 1) / 2)


def isotropic_tensor_coefficient(d: int, k: int, s: int) -> float:
    """c with E Phi_k^{0,s}(Z) = c * E V_k(Z) * Q^{s/2} for isotropic random polytopes Z."""
    if s % 2:
        return 0.0
    return (
        2 * omega(d + s) * omega(d - k)
        / (math.factorial(s) * omega(d) * omega(s + 1) * omega(d - k + s))
    )


def beta_expected_tensor(d: int, k: int, l: int, beta: float, s: int) -> SymTensor:
    if s % 2:
        return SymTensor.zeros(d, s)
    ev = beta_expected_intrinsic(d, k, l, beta)
    return metric_power(d, s // 2) * (isotropic_tensor_coefficient(d, k, s) * ev)


def beta_expected_volume_mc(d: int, l: int, beta: float, n_samples: int = 10_000, seed=None):
    """Monte Carlo mean and standard error of the hull volume."""
    from scipy.spatial import ConvexHull

    BetaPolytopeSpec(d, l, beta)
    rng = np.random.default_rng(seed)
    vols = np.array([
        ConvexHull(sample_beta_points(d, l, beta, rng)).volume for _ in range(n_samples)
    ])
    return float(vols.mean()), float(vols.std(ddof=1) / math.sqrt(n_samples))
