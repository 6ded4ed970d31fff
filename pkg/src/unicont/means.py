"""Spherical means and numerical checks of the mean-value identities.

The mean of a Dirichlet eigenfunction ``S_n`` over the sphere of radius ``r``
about ``x`` factors as ``S_n(x) G_N(r lambda_n)``; as a function of ``r`` it
solves ``r Phi'' + (N - 1) Phi' + lambda^2 r Phi = 0`` with ``Phi'(0) = 0``.
This module evaluates the means by quadrature and measures how far those
identities are from holding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domains import Domain, as_points
from .eigenbasis import SpectralBasis
from .errors import GeometryViolation, InvalidArgument
from .kernels import eval_g

SURFACE_AREA = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Antipodally paired rule on the unit sphere.

    Only one node of each pair ``(z, -z)`` is stored; the mean evaluates
    ``f(x + r z) + f(x - r z)`` together, which makes ``Phi(x, r)`` and
    ``Phi(x, -r)`` bitwise identical.
    """

    dim: int
    half_nodes: np.ndarray
    half_weights: np.ndarray

    @property
    def order(self) -> int:
        return 2 * len(self.half_weights)

    @property
    def surface(self) -> float:
        return SURFACE_AREA[self.dim]

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([self.half_nodes, -self.half_nodes])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.half_weights, self.half_weights])


def sphere_quadrature(dim: int, order: int | None = None) -> SphereQuadrature:
    """Default rules: N=1 the two points +-1; N=2 the uniform circle rule with
    ``order`` (even) nodes, default 256; N=3 Gauss-Legendre in the polar cosine
    times a uniform longitude rule, default 32 x 64."""
    if dim == 1:
        return SphereQuadrature(1, np.array([[1.0]]), np.array([1.0]))
    if dim == 2:
        order = 256 if order is None else order
        if order < 2 or order % 2:
            raise InvalidArgument("circle rule needs an even number of nodes")
        th = 2 * math.pi * np.arange(order // 2) / order
        z = np.stack([np.cos(th), np.sin(th)], axis=1)
        return SphereQuadrature(2, z, np.full(order // 2, 2 * math.pi / order))
    if dim == 3:
        n_lat, n_lon = (32, 64) if order is None else (order // 2, order)
        if n_lon % 2 or n_lat % 2:
            raise InvalidArgument("the 3D rule needs even latitude and longitude counts")
        u, wu = np.polynomial.legendre.leggauss(n_lat)
        u = 0.5 * (u - u[::-1])  # exact antisymmetry of the node set
        ph = 2 * math.pi * np.arange(n_lon) / n_lon
        U, P = np.meshgrid(u, ph, indexing="ij")
        s = np.sqrt(1 - U**2)
        z = np.stack([s * np.cos(P), s * np.sin(P), U], axis=-1).reshape(-1, 3)
        w = np.outer(wu, np.full(n_lon, 2 * math.pi / n_lon)).ravel()
        # keep one node of each antipodal pair: upper hemisphere in u
        keep = z[:, 2] > 0
        return SphereQuadrature(3, z[keep], w[keep])
    raise InvalidArgument(f"sphere quadratures are provided for N = 1, 2, 3, not {dim}")


def spherical_mean(f: Callable, x, r: float, quad: SphereQuadrature, domain: Domain | None = None) -> float:
    """Average of ``f`` over the sphere of radius ``|r|`` about ``x``.

    ``f`` maps an ``(m, N)`` array of points to ``m`` values.  When a domain is
    given, the ball must lie inside it.
    """
    center = np.atleast_1d(np.asarray(x, dtype=float))
    if center.size != quad.dim:
        raise InvalidArgument(f"center has {center.size} coordinates, quadrature is {quad.dim}-dimensional")
    if domain is not None and not domain.contains_ball(center, r):
        raise GeometryViolation(f"ball of radius {abs(r)} about {center.tolist()} leaves the domain")
    if r == 0:
        return float(np.asarray(f(center[None, :]), dtype=float)[0])
    step = r * quad.half_nodes
    plus = np.asarray(f(center + step), dtype=float)
    minus = np.asarray(f(center - step), dtype=float)
    return float(np.sum(quad.half_weights * (plus + minus)) / quad.surface)


def factorization_residual(basis: SpectralBasis, n: int, x, r: float, quad: SphereQuadrature) -> float:
    """``|mean of S_n over the sphere - S_n(x) G_N(r lambda_n)|`` for 1-based mode ``n``."""
    pair = basis[n - 1]
    mean = spherical_mean(pair.eigenfunction, x, r, quad, basis.domain)
    center, _ = as_points(x, basis.dim)
    expected = float(pair.eigenfunction(center)[0]) * eval_g(basis.dim, r * pair.lam)
    return abs(mean - expected)


def sample_mean_triples(basis: SpectralBasis, rng: np.random.Generator, count: int, n_max: int = 10):
    """Random ``(n, x, r)`` with ``1 <= n <= n_max`` and the ball ``B_r(x)`` inside the domain."""
    n_max = min(n_max, len(basis))
    dom = basis.domain
    lo, hi = dom.bbox
    out = []
    while len(out) < count:
        x = lo + (hi - lo) * rng.random(dom.dim)
        xq = x if dom.dim > 1 else x[0]
        if not dom.contains(xq):
            continue
        clr = float(np.atleast_1d(dom.clearance(xq))[0])
        out.append((int(rng.integers(1, n_max + 1)), x, clr * rng.uniform(0.05, 0.95)))
    return out


@dataclass(frozen=True, eq=False)
class MeanProfile:
    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray


def mean_profile(f: Callable, x, radii, quad: SphereQuadrature, domain: Domain | None = None) -> MeanProfile:
    radii = np.asarray(radii, dtype=float)
    values = np.array([spherical_mean(f, x, r, quad, domain) for r in radii])
    return MeanProfile(np.atleast_1d(np.asarray(x, dtype=float)), radii, values)


def mean_ode_residual(profile: MeanProfile, lam: float, N: int) -> float:
    """Largest defect of the radial ODE on a uniform radius grid.

    Returns the maximum over interior radii of
    ``|r Phi'' + (N - 1) Phi' + lam^2 r Phi|`` (central differences) together
    with the one-sided estimate of ``|Phi'(0)|`` when the grid starts at 0.
    """
    r, phi = profile.radii, profile.values
    if len(r) < 5:
        raise InvalidArgument("the radius grid needs at least 5 points")
    h = r[1] - r[0]
    if not h > 0 or not np.allclose(np.diff(r), h, rtol=1e-9, atol=0):
        raise InvalidArgument("the radius grid must be uniform and increasing")
    d1 = (phi[2:] - phi[:-2]) / (2 * h)
    d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / (h * h)
    ri = r[1:-1]
    resid = np.abs(ri * d2 + (N - 1) * d1 + lam * lam * ri * phi[1:-1])
    worst = float(resid.max())
    if r[0] == 0.0:
        slope0 = abs(-3 * phi[0] + 4 * phi[1] - phi[2]) / (2 * h)
        worst = max(worst, slope0)
    return worst


@dataclass(frozen=True)
class ReflectionCheck:
    """Outcome of :func:`reflection_zero_check`; truthy when the check passed."""

    passed: bool
    hypothesis_met: bool
    hypothesis_defect: float
    max_abs_h: float

    def __bool__(self) -> bool:
        return self.passed


def reflection_zero_check(h: Callable, D: tuple[float, float], V: tuple[float, float],
                          samples: int = 64, tol: float = 1e-12) -> ReflectionCheck:
    """Check that odd reflection symmetry about every point of ``V`` forces ``h = 0``.

    The hypothesis is ``h(x - xi) + h(x + xi) = 0`` for sampled ``x`` in ``V``
    and every sampled ``xi`` keeping ``(x - xi, x + xi)`` inside ``D``.  When it
    holds (to ``tol``), ``h`` must vanish on the largest interval
    ``[x0 - R, x0 + R]`` inside ``D`` centred at the midpoint ``x0`` of ``V``.
    A failed hypothesis passes vacuously with ``hypothesis_met=False``.
    """
    a, b = map(float, D)
    v0, v1 = map(float, V)
    if not (a < v0 < v1 < b):
        raise InvalidArgument("V must be a nonempty subinterval of D")
    hv = lambda t: np.asarray(h(np.asarray(t, dtype=float)), dtype=float)
    defect = 0.0
    for x in np.linspace(v0, v1, samples):
        reach = min(x - a, b - x)
        xi = reach * np.arange(1, samples + 1) / (samples + 1)
        defect = max(defect, float(np.max(np.abs(hv(x - xi) + hv(x + xi)))))
    x0 = 0.5 * (v0 + v1)
    R = min(x0 - a, b - x0) * (1 - 1e-9)
    max_abs = float(np.max(np.abs(hv(np.linspace(x0 - R, x0 + R, 4 * samples + 1)))))
    if defect > tol:
        return ReflectionCheck(True, False, defect, max_abs)
    return ReflectionCheck(max_abs <= tol, True, defect, max_abs)
