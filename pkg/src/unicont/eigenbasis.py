"""L2-normalized Dirichlet Laplacian eigenbases.

Analytic bases cover the interval, the rectangle and the disk; a five-point
finite-difference solve handles arbitrary lattice masks.  Every basis is an
immutable :class:`SpectralBasis` whose pairs are sorted by eigenvalue, with
ties broken lexicographically by mode labels and equal eigenvalues sharing a
multiplicity group.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy import special
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .domains import Domain, as_points
from .errors import InvalidArgument, NumericFailure

ANALYTIC_GROUP_RTOL = 1e-12
GRID_GROUP_RTOL = 1e-8
DENSE_LIMIT = 2500
GRID_RESIDUAL_TOL = 1e-10
DISK_RADIAL_ORDER = 64


@dataclass(frozen=True, eq=False)
class EigenPair:
    """One Dirichlet eigenpair; ``eigenfunction`` maps ``(m, dim)`` points to values."""

    index: int
    lam: float
    lambda_sq: float
    group: int
    label: tuple
    eigenfunction: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    gradient: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, x):
        return self.eigenfunction(x)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    domain: Domain
    pairs: tuple[EigenPair, ...]
    normalization: str

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i: int) -> EigenPair:
        return self.pairs[i]

    @property
    def dim(self) -> int:
        return self.domain.dim

    def lambdas(self, K: int | None = None) -> np.ndarray:
        return np.array([p.lam for p in self.pairs[:K]])

    def lambda_sq(self, K: int | None = None) -> np.ndarray:
        return np.array([p.lambda_sq for p in self.pairs[:K]])

    def groups(self, K: int | None = None) -> np.ndarray:
        return np.array([p.group for p in self.pairs[:K]])

    def truncate(self, K: int) -> "SpectralBasis":
        self.check_size(K)
        return SpectralBasis(self.domain, self.pairs[:K], self.normalization)

    def check_size(self, K: int) -> None:
        if not 1 <= K <= len(self.pairs):
            raise InvalidArgument(f"truncation K={K} must lie in [1, {len(self.pairs)}]")

    def values(self, x, K: int | None = None) -> np.ndarray:
        """Matrix of ``S_n(x_j)``: rows are points, columns are the first ``K`` modes."""
        pts, _ = as_points(x, self.dim)
        K = len(self.pairs) if K is None else K
        self.check_size(K)
        return np.stack([p.eigenfunction(pts) for p in self.pairs[:K]], axis=1)

    def gram(self, K: int, order: int = 64) -> np.ndarray:
        """L2 Gram matrix of the first ``K`` modes under domain quadrature."""
        pts, w = self.domain.quadrature(order)
        V = self.values(pts, K)
        return V.T @ (w[:, None] * V)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "lambda_sq", "lambda", "group"])
            for p in self.pairs:
                writer.writerow([p.index, f"{p.lambda_sq:.17g}", f"{p.lam:.17g}", p.group])


def _assign_groups(values: np.ndarray, rtol: float) -> list[int]:
    groups, g = [], 0
    for k, v in enumerate(values):
        if k > 0 and abs(v - values[k - 1]) > rtol * max(abs(v), abs(values[k - 1])):
            g += 1
        groups.append(g)
    return groups


def _check_count(count) -> int:
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise InvalidArgument(f"mode count must be a positive integer, got {count!r}")
    return int(count)


# -- interval -----------------------------------------------------------------

def build_interval_basis(L: float, count: int, a: float = 0.0) -> SpectralBasis:
    """Modes ``sqrt(2/L) sin(n pi (x - a) / L)`` on ``(a, a + L)``, ``n = 1..count``."""
    if not L > 0:
        raise InvalidArgument(f"interval length must be positive, got {L}")
    count = _check_count(count)
    domain = Domain.interval(a, a + L)
    amp = math.sqrt(2.0 / L)
    pairs = []
    for n in range(1, count + 1):
        k = n * math.pi / L

        def f(x, k=k):
            pts, _ = as_points(x, 1)
            return amp * np.sin(k * (pts[:, 0] - a))

        def grad(x, k=k):
            pts, _ = as_points(x, 1)
            return (amp * k * np.cos(k * (pts[:, 0] - a)))[:, None]

        pairs.append(EigenPair(n, k, k * k, n - 1, (n,), f, grad))
    return SpectralBasis(domain, tuple(pairs), "analytic")


# -- rectangle ----------------------------------------------------------------

def build_rectangle_basis(Lx: float, Ly: float, count: int) -> SpectralBasis:
    """Lowest ``count`` product-sine modes of ``(0, Lx) x (0, Ly)``."""
    if not (Lx > 0 and Ly > 0):
        raise InvalidArgument(f"rectangle sides must be positive, got {Lx} x {Ly}")
    count = _check_count(count)
    domain = Domain.rectangle(Lx, Ly)
    kx, ky = math.pi / Lx, math.pi / Ly
    # the lowest `count` modes never need an index above `count`
    modes = sorted(((kx * m) ** 2 + (ky * n) ** 2, m, n)
                   for m in range(1, count + 1) for n in range(1, count + 1))[:count]
    groups = _assign_groups(np.array([m[0] for m in modes]), ANALYTIC_GROUP_RTOL)
    amp = 2.0 / math.sqrt(Lx * Ly)
    pairs = []
    for i, ((lsq, m, n), g) in enumerate(zip(modes, groups)):
        a, b = kx * m, ky * n

        def f(x, a=a, b=b):
            pts, _ = as_points(x, 2)
            return amp * np.sin(a * pts[:, 0]) * np.sin(b * pts[:, 1])

        def grad(x, a=a, b=b):
            pts, _ = as_points(x, 2)
            sx, sy = np.sin(a * pts[:, 0]), np.sin(b * pts[:, 1])
            cx, cy = np.cos(a * pts[:, 0]), np.cos(b * pts[:, 1])
            return amp * np.stack([a * cx * sy, b * sx * cy], axis=1)

        pairs.append(EigenPair(i + 1, math.sqrt(lsq), lsq, g, (m, n), f, grad))
    return SpectralBasis(domain, tuple(pairs), "analytic")


# -- disk ---------------------------------------------------------------------

def bessel_zeros(k: int, count: int) -> np.ndarray:
    """First ``count`` positive zeros of ``J_k``, polished and verified."""
    zeros = special.jn_zeros(k, count)
    out = np.empty(count)
    for i, z in enumerate(zeros):
        lo, hi = z - 0.1, z + 0.1
        f_lo, f_hi = special.jv(k, lo), special.jv(k, hi)
        if f_lo * f_hi > 0:
            # refine the bracket once before giving up
            lo, hi = z - 0.01, z + 0.01
            f_lo, f_hi = special.jv(k, lo), special.jv(k, hi)
            if f_lo * f_hi > 0:
                raise NumericFailure(
                    f"no sign change around zero {i + 1} of J_{k}: J({lo})={f_lo:.3e}, J({hi})={f_hi:.3e}")
        out[i] = brentq(lambda r: special.jv(k, r), lo, hi, xtol=1e-15, rtol=1e-15)
    if np.any(np.diff(out) <= 0):
        raise NumericFailure(f"zeros of J_{k} are not strictly increasing")
    return out


def build_disk_basis(R: float, count: int) -> SpectralBasis:
    """Modes ``J_k(j_{k,m} r / R) {cos, sin}(k theta)`` of the disk of radius ``R``."""
    if not R > 0:
        raise InvalidArgument(f"disk radius must be positive, got {R}")
    count = _check_count(count)
    domain = Domain.disk(R)
    # k = 0 alone yields `count` modes, so j_{0,count} bounds the cutoff
    cutoff = bessel_zeros(0, count)[-1]
    modes = []
    k = 0
    while True:
        if k > 0 and special.jn_zeros(k, 1)[0] > cutoff:
            break
        mmax = int(cutoff / math.pi) + 2
        zs = bessel_zeros(k, mmax)
        for m, z in enumerate(zs[zs <= cutoff], start=1):
            trig = (0,) if k == 0 else (0, 1)
            for t in trig:
                modes.append(((z / R) ** 2, k, m, t, z))
        k += 1
    modes.sort(key=lambda q: q[:4])
    modes = modes[:count]
    lsq_values = np.array([q[0] for q in modes])
    # Bessel zeros of different orders never coincide, so groups are (k, m) pairs
    groups, g, prev = [], -1, None
    for q in modes:
        if (q[1], q[2]) != prev:
            g += 1
            prev = (q[1], q[2])
        groups.append(g)
    xr, wr = np.polynomial.legendre.leggauss(DISK_RADIAL_ORDER)
    r_nodes, r_weights = 0.5 * R * (xr + 1), 0.5 * R * wr
    pairs = []
    for i, ((lsq, k, m, t, z), g) in enumerate(zip(modes, groups)):
        lam = z / R
        radial = np.sum(r_weights * r_nodes * special.jv(k, lam * r_nodes) ** 2)
        angular = 2 * math.pi if k == 0 else math.pi
        norm = math.sqrt(radial * angular)

        def f(x, k=k, lam=lam, t=t, norm=norm):
            pts, _ = as_points(x, 2)
            r = np.hypot(pts[:, 0], pts[:, 1])
            th = np.arctan2(pts[:, 1], pts[:, 0])
            ang = np.cos(k * th) if t == 0 else np.sin(k * th)
            return special.jv(k, lam * r) * ang / norm

        def grad(x, k=k, lam=lam, t=t, norm=norm):
            pts, _ = as_points(x, 2)
            r = np.hypot(pts[:, 0], pts[:, 1])
            th = np.arctan2(pts[:, 1], pts[:, 0])
            J, dJ = special.jv(k, lam * r), lam * special.jvp(k, lam * r)
            ang = np.cos(k * th) if t == 0 else np.sin(k * th)
            dang = -k * np.sin(k * th) if t == 0 else k * np.cos(k * th)
            with np.errstate(divide="ignore", invalid="ignore"):
                tang = np.where(r > 0, J * dang / r, 0.0)
            if k == 1:
                # J_1(lam r)/r -> lam/2 at the origin
                tang = np.where(r > 0, tang, 0.5 * lam * dang)
            fr = dJ * ang
            gx = fr * np.cos(th) - tang * np.sin(th)
            gy = fr * np.sin(th) + tang * np.cos(th)
            return np.stack([gx, gy], axis=1) / norm

        label = (k, m, "cos" if t == 0 else "sin")
        pairs.append(EigenPair(i + 1, lam, lam * lam, g, label, f, grad))
    assert np.all(np.diff(lsq_values) >= 0)
    return SpectralBasis(domain, tuple(pairs), f"gauss-legendre radial order {DISK_RADIAL_ORDER}")


# -- grid ---------------------------------------------------------------------

def grid_laplacian(mask: np.ndarray, h: float) -> sp.csr_matrix:
    """Negative five-point (three-point in 1D) Dirichlet Laplacian on interior nodes."""
    mask = np.asarray(mask, dtype=bool)
    number = -np.ones(mask.shape, dtype=np.int64)
    idx = np.argwhere(mask)
    number[tuple(idx.T)] = np.arange(len(idx))
    n = len(idx)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 2.0 * mask.ndim)]
    for axis in range(mask.ndim):
        for step in (-1, 1):
            nb = idx.copy()
            nb[:, axis] += step
            ok = (nb[:, axis] >= 0) & (nb[:, axis] < mask.shape[axis])
            j = np.full(n, -1)
            j[ok] = number[tuple(nb[ok].T)]
            keep = j >= 0
            rows.append(np.arange(n)[keep])
            cols.append(j[keep])
            vals.append(-np.ones(keep.sum()))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A / (h * h)


def build_grid_basis(domain: Domain, count: int) -> SpectralBasis:
    """Smallest ``count`` eigenpairs of the finite-difference Dirichlet Laplacian.

    Below ``DENSE_LIMIT`` unknowns the dense symmetric solver is used; above
    it, shift-invert Lanczos (ARPACK) started from the all-ones vector.
    Eigenvectors are normalized in the discrete L2 norm ``h^dim * sum(v^2)``
    and extended to the plane by (bi)linear interpolation, zero outside the
    interior nodes.
    """
    if domain.kind != "grid_mask":
        raise InvalidArgument("build_grid_basis needs a grid_mask domain")
    count = _check_count(count)
    mask, h = domain.mask, domain.h
    n = int(mask.sum())
    if count > n:
        raise InvalidArgument(f"requested {count} modes but the mask has {n} interior nodes")
    A = grid_laplacian(mask, h)
    if n < DENSE_LIMIT or count >= n - 1:
        w, V = np.linalg.eigh(A.toarray())
        w, V = w[:count], V[:, :count]
    else:
        try:
            w, V = eigsh(A, k=count, sigma=0.0, which="LM", v0=np.ones(n), tol=GRID_RESIDUAL_TOL)
        except ArpackNoConvergence as exc:
            raise NumericFailure(f"Lanczos solve did not converge for {count} modes on {n} nodes") from exc
        order = np.argsort(w, kind="stable")
        w, V = w[order], V[:, order]
    resid = np.linalg.norm(A @ V - V * w, axis=0) / np.maximum(1.0, np.abs(w))
    if np.any(resid > 1e3 * GRID_RESIDUAL_TOL):
        raise NumericFailure(f"grid eigen-residual {resid.max():.3e} exceeds tolerance")
    V = V / np.sqrt(h**mask.ndim * np.sum(V * V, axis=0))
    # deterministic sign: largest-magnitude entry positive
    pivots = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivots, np.arange(count)])
    groups = _assign_groups(w, GRID_GROUP_RTOL)
    idx = np.argwhere(mask)
    axes = [domain.origin[k] + h * np.arange(mask.shape[k]) for k in range(mask.ndim)]
    pairs = []
    for i in range(count):
        full = np.zeros(mask.shape)
        full[tuple(idx.T)] = V[:, i]
        if mask.ndim == 1:
            def f(x, full=full):
                pts, _ = as_points(x, 1)
                return np.interp(pts[:, 0], axes[0], full, left=0.0, right=0.0)
        else:
            interp = RegularGridInterpolator(axes, full, method="linear", bounds_error=False, fill_value=0.0)

            def f(x, interp=interp):
                pts, _ = as_points(x, 2)
                return interp(pts)
        lsq = float(w[i])
        pairs.append(EigenPair(i + 1, math.sqrt(lsq), lsq, groups[i], (i + 1,), f, None))
    return SpectralBasis(domain, tuple(pairs), f"discrete l2, h={h:g}")


def build_basis(domain: Domain, count: int) -> SpectralBasis:
    """Dispatch on the domain kind."""
    if domain.kind == "interval":
        return build_interval_basis(domain.b - domain.a, count, a=domain.a)
    if domain.kind == "rectangle":
        return build_rectangle_basis(domain.Lx, domain.Ly, count)
    if domain.kind == "disk":
        return build_disk_basis(domain.R, count)
    return build_grid_basis(domain, count)


# -- Weyl law -----------------------------------------------------------------

class WeylFit(NamedTuple):
    exponent: float
    constant: float
    expected_exponent: float
    expected_constant: float


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def weyl_constant(N: int, measure: float) -> float:
    """Leading coefficient ``4 pi^2 / (omega_N |Omega|)^(2/N)`` of the Weyl asymptotics."""
    return 4 * math.pi**2 / (unit_ball_volume(N) * measure) ** (2 / N)


def weyl_fit(basis: SpectralBasis) -> WeylFit:
    """Fit the growth of ``lambda_n^2`` over the upper half of the spectrum.

    The exponent is the slope of a free log-log fit.  The constant is the
    leading coefficient of ``C n^(2/N) + D n^(1/N)``, i.e. the Weyl term with
    its boundary correction, fitted with the exponent held at ``2/N``.
    """
    K = len(basis)
    if K < 50:
        raise InvalidArgument(f"weyl_fit needs at least 50 modes, got {K}")
    N = basis.dim
    n = np.arange(1, K + 1, dtype=float)
    lsq = basis.lambda_sq()
    upper = slice(K // 2, K)
    slope, _ = np.polyfit(np.log(n[upper]), np.log(lsq[upper]), 1)
    design = np.stack([n[upper] ** (2 / N), n[upper] ** (1 / N)], axis=1)
    coef, *_ = np.linalg.lstsq(design, lsq[upper], rcond=None)
    return WeylFit(float(slope), float(coef[0]), 2 / N, weyl_constant(N, basis.domain.measure))
