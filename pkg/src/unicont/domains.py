"""Domains, lattices and observation subregions.

A :class:`Domain` is the open set on which eigenbases live.  Analytic kinds
(interval, rectangle, disk) know their boundary exactly; ``grid_mask`` domains
are a boolean interior mask on a regular lattice, with the Dirichlet boundary
sitting on the first non-interior nodes.

A :class:`Region` describes an observation set such as omega.  Regions are
rasterized onto a :class:`Lattice` for shortest-path work and sampled directly
for space-time observation operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml
from scipy import ndimage
from scipy.stats import qmc

from .errors import InvalidArgument

KINDS = ("interval", "rectangle", "disk", "grid_mask")


def as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to an ``(m, dim)`` float array.

    Returns the array and a flag telling whether the input was a single point.
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        if arr.ndim == 0:
            return arr.reshape(1, 1), True
        if arr.ndim == 2 and arr.shape[1] == 1:
            return arr, False
        return arr.reshape(-1, 1), False
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise InvalidArgument(f"expected a point with {dim} coordinates, got shape {arr.shape}")
        return arr.reshape(1, dim), True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidArgument(f"expected points of shape (m, {dim}), got {arr.shape}")
    return arr, False


@dataclass(frozen=True, eq=False)
class Lattice:
    """Regular node lattice ``origin + h * index`` with an interior mask."""

    origin: np.ndarray
    h: float
    interior: np.ndarray

    @property
    def dim(self) -> int:
        return self.interior.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.interior.shape

    def node_coords(self, index) -> np.ndarray:
        idx = np.asarray(index, dtype=float)
        return self.origin + self.h * idx

    def interior_indices(self) -> np.ndarray:
        return np.argwhere(self.interior)

    def interior_points(self) -> np.ndarray:
        return self.node_coords(self.interior_indices())

    def nearest_node(self, point) -> tuple[int, ...]:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint((p - self.origin) / self.h).astype(int)
        return tuple(int(i) for i in idx)

    def in_bounds(self, index) -> bool:
        return all(0 <= i < n for i, n in zip(index, self.shape))

    def nearest_interior(self, point) -> tuple[int, ...]:
        """Snap ``point`` to the closest interior node."""
        idx = self.interior_indices()
        if idx.size == 0:
            raise InvalidArgument("lattice has no interior nodes")
        p = np.atleast_1d(np.asarray(point, dtype=float))
        d2 = np.sum((self.node_coords(idx) - p) ** 2, axis=1)
        return tuple(int(i) for i in idx[int(np.argmin(d2))])

    def clearance(self) -> np.ndarray:
        """Distance from every node to the nearest non-interior node."""
        padded = np.pad(self.interior, 1, constant_values=False)
        edt = ndimage.distance_transform_edt(padded) * self.h
        return edt[tuple(slice(1, -1) for _ in range(self.dim))]


@dataclass(frozen=True, eq=False)
class Domain:
    """Open bounded connected set in R^1 or R^2.

    Use the constructors :meth:`interval`, :meth:`rectangle`, :meth:`disk`
    and :meth:`grid` rather than calling the class directly.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    Lx: float = 0.0
    Ly: float = 0.0
    R: float = 0.0
    mask: np.ndarray | None = field(default=None, repr=False)
    h: float = 0.0
    origin: np.ndarray | None = None

    # -- constructors -------------------------------------------------
    @classmethod
    def interval(cls, a: float, b: float) -> "Domain":
        if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
            raise InvalidArgument(f"interval needs a < b, got ({a}, {b})")
        return cls("interval", a=float(a), b=float(b))

    @classmethod
    def rectangle(cls, Lx: float, Ly: float) -> "Domain":
        if not (Lx > 0 and Ly > 0):
            raise InvalidArgument(f"rectangle sides must be positive, got {Lx} x {Ly}")
        return cls("rectangle", Lx=float(Lx), Ly=float(Ly))

    @classmethod
    def disk(cls, R: float) -> "Domain":
        if not R > 0:
            raise InvalidArgument(f"disk radius must be positive, got {R}")
        return cls("disk", R=float(R))

    @classmethod
    def grid(cls, mask, h: float, origin=None) -> "Domain":
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim not in (1, 2):
            raise InvalidArgument("grid masks must be 1D or 2D")
        if not h > 0:
            raise InvalidArgument(f"grid spacing must be positive, got {h}")
        if not mask.any():
            raise InvalidArgument("grid mask has no interior nodes")
        _, ncomp = ndimage.label(mask)
        if ncomp != 1:
            raise InvalidArgument(f"grid mask must be 4-connected, found {ncomp} components")
        origin = np.zeros(mask.ndim) if origin is None else np.asarray(origin, dtype=float).reshape(mask.ndim)
        mask = mask.copy()
        mask.setflags(write=False)
        return cls("grid_mask", mask=mask, h=float(h), origin=origin)

    @classmethod
    def from_predicate(cls, inside, lower, upper, h: float) -> "Domain":
        """Grid domain whose interior nodes are the lattice nodes where ``inside`` holds.

        ``lower``/``upper`` bound the closure of the set; nodes on that box are
        never interior.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        counts = np.rint((upper - lower) / h).astype(int) + 1
        axes = [lower[k] + h * np.arange(counts[k]) for k in range(lower.size)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        ok = np.asarray(inside(pts), dtype=bool).reshape(counts)
        border = np.zeros(counts, dtype=bool)
        for k in range(lower.size):
            sl = [slice(None)] * lower.size
            sl[k] = 0
            border[tuple(sl)] = True
            sl[k] = -1
            border[tuple(sl)] = True
        return cls.grid(ok & ~border, h, origin=lower)

    # -- geometry -----------------------------------------------------
    @property
    def dim(self) -> int:
        if self.kind == "interval":
            return 1
        if self.kind == "grid_mask":
            return self.mask.ndim
        return 2

    @property
    def measure(self) -> float:
        """Lebesgue measure of the domain (node-cell measure for grids)."""
        if self.kind == "interval":
            return self.b - self.a
        if self.kind == "rectangle":
            return self.Lx * self.Ly
        if self.kind == "disk":
            return np.pi * self.R**2
        return float(self.mask.sum()) * self.h**self.dim

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "interval":
            return np.array([self.a]), np.array([self.b])
        if self.kind == "rectangle":
            return np.zeros(2), np.array([self.Lx, self.Ly])
        if self.kind == "disk":
            return -self.R * np.ones(2), self.R * np.ones(2)
        lo = self.origin
        return lo.copy(), lo + self.h * (np.array(self.mask.shape) - 1)

    def contains(self, x) -> np.ndarray | bool:
        pts, single = as_points(x, self.dim)
        inside = self.clearance(pts) > 0
        return bool(inside[0]) if single else inside

    def clearance(self, x) -> np.ndarray:
        """Distance to the boundary (non-positive outside).

        For grid domains this is a lower bound built from the distance
        transform of the interior mask.
        """
        pts, single = as_points(x, self.dim)
        if self.kind == "interval":
            c = np.minimum(pts[:, 0] - self.a, self.b - pts[:, 0])
        elif self.kind == "rectangle":
            c = np.minimum.reduce([pts[:, 0], self.Lx - pts[:, 0], pts[:, 1], self.Ly - pts[:, 1]])
        elif self.kind == "disk":
            c = self.R - np.hypot(pts[:, 0], pts[:, 1])
        else:
            lat = self.lattice()
            edt = self._grid_edt
            rel = (pts - self.origin) / self.h
            idx = np.rint(rel).astype(int)
            ok = np.all((idx >= 0) & (idx < np.array(self.mask.shape)), axis=1)
            c = np.full(len(pts), -1.0)
            if ok.any():
                ii = tuple(idx[ok].T)
                node_dist = np.linalg.norm(lat.node_coords(idx[ok]) - pts[ok], axis=1)
                c[ok] = np.where(self.mask[ii], edt[ii] - node_dist, -1.0)
        return c[0] if single else c

    def contains_ball(self, center, r: float) -> bool:
        """True when the closed ball of radius ``r`` about ``center`` lies in the domain.

        Boundary contact is tolerated to one part in 1e12.
        """
        c = float(np.atleast_1d(self.clearance(np.asarray(center, dtype=float)))[0])
        return c > 0 and abs(r) <= c * (1 + 1e-12)

    def lattice(self, h: float | None = None) -> Lattice:
        """Rasterize the domain: interior nodes are lattice nodes strictly inside."""
        if self.kind == "grid_mask":
            if h is not None and not np.isclose(h, self.h, rtol=1e-12):
                raise InvalidArgument(f"grid domain has fixed spacing {self.h}, asked for {h}")
            return Lattice(self.origin, self.h, self.mask)
        if h is None or not h > 0:
            raise InvalidArgument("a positive lattice spacing is required for analytic domains")
        lo, hi = self.bbox
        counts = np.rint((hi - lo) / h).astype(int) + 1
        axes = [lo[k] + h * np.arange(counts[k]) for k in range(lo.size)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        inside = (self.clearance(pts) > 1e-12 * h).reshape(counts)
        return Lattice(lo, float(h), inside)

    def quadrature(self, order: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights integrating smooth functions over the domain."""
        if self.kind == "grid_mask":
            lat = self.lattice()
            pts = lat.interior_points()
            return pts, np.full(len(pts), self.h**self.dim)
        x, w = np.polynomial.legendre.leggauss(order)
        if self.kind == "interval":
            half = 0.5 * (self.b - self.a)
            return (self.a + half * (x + 1)).reshape(-1, 1), half * w
        if self.kind == "rectangle":
            xs, wx = 0.5 * self.Lx * (x + 1), 0.5 * self.Lx * w
            ys, wy = 0.5 * self.Ly * (x + 1), 0.5 * self.Ly * w
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            return np.stack([X.ravel(), Y.ravel()], axis=1), np.outer(wx, wy).ravel()
        r, wr = 0.5 * self.R * (x + 1), 0.5 * self.R * w
        nth = 2 * order
        th = 2 * np.pi * np.arange(nth) / nth
        Rr, Th = np.meshgrid(r, th, indexing="ij")
        W = np.outer(wr * r, np.full(nth, 2 * np.pi / nth))
        return np.stack([(Rr * np.cos(Th)).ravel(), (Rr * np.sin(Th)).ravel()], axis=1), W.ravel()

    @cached_property
    def _grid_edt(self) -> np.ndarray:
        return self.lattice().clearance()

    def describe(self) -> dict:
        if self.kind == "interval":
            return {"kind": "interval", "a": self.a, "b": self.b}
        if self.kind == "rectangle":
            return {"kind": "rectangle", "Lx": self.Lx, "Ly": self.Ly}
        if self.kind == "disk":
            return {"kind": "disk", "R": self.R}
        return {"kind": "grid_mask", "h": self.h, "shape": list(self.mask.shape),
                "origin": self.origin.tolist(), "interior_nodes": int(self.mask.sum())}


def l_shape(h: float) -> Domain:
    """The L-shaped set (0,2)^2 minus [1,2]x[1,2] on a lattice of spacing ``h``."""
    def inside(p):
        x, y = p[:, 0], p[:, 1]
        return (x > 0) & (x < 2) & (y > 0) & (y < 2) & ~((x >= 1) & (y >= 1))
    return Domain.from_predicate(inside, [0.0, 0.0], [2.0, 2.0], h)


@dataclass(frozen=True, eq=False)
class Region:
    """Observation subset omega of a domain.

    ``kind`` is one of ``interval`` (a, b), ``box`` (lower, upper corners),
    ``ball`` (center, radius), ``points`` (explicit point list) or
    ``predicate`` (a vectorized callable on ``(m, dim)`` arrays).
    """

    kind: str
    dim: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float = 0.0
    points: np.ndarray | None = None
    predicate: object = None

    @classmethod
    def interval(cls, a: float, b: float) -> "Region":
        if not a < b:
            raise InvalidArgument(f"omega interval needs a < b, got ({a}, {b})")
        return cls("interval", 1, lower=np.array([float(a)]), upper=np.array([float(b)]))

    @classmethod
    def box(cls, lower, upper) -> "Region":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or np.any(lower >= upper):
            raise InvalidArgument("omega box needs lower < upper componentwise")
        return cls("box", lower.size, lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius: float) -> "Region":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if not radius > 0:
            raise InvalidArgument("omega ball radius must be positive")
        return cls("ball", center.size, center=center, radius=float(radius))

    @classmethod
    def from_points(cls, points, dim: int) -> "Region":
        pts, _ = as_points(points, dim)
        if len(pts) == 0:
            raise InvalidArgument("omega point set is empty")
        return cls("points", dim, points=pts)

    @classmethod
    def from_predicate(cls, predicate, dim: int, lower, upper) -> "Region":
        return cls("predicate", dim, lower=np.atleast_1d(np.asarray(lower, float)),
                   upper=np.atleast_1d(np.asarray(upper, float)), predicate=predicate)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "ball":
            return self.center - self.radius, self.center + self.radius
        if self.kind == "points":
            return self.points.min(axis=0), self.points.max(axis=0)
        return self.lower, self.upper

    def contains(self, x, closed: bool = False) -> np.ndarray:
        """Membership of the open region, or of its closure when ``closed``."""
        pts, _ = as_points(x, self.dim)
        if self.kind in ("interval", "box"):
            if closed:
                return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)
            return np.all((pts > self.lower) & (pts < self.upper), axis=1)
        if self.kind == "ball":
            dist = np.linalg.norm(pts - self.center, axis=1)
            return dist <= self.radius if closed else dist < self.radius
        if self.kind == "predicate":
            return np.asarray(self.predicate(pts), dtype=bool)
        return np.zeros(len(pts), dtype=bool)

    def rasterize(self, lattice: Lattice) -> np.ndarray:
        """Boolean source mask on ``lattice`` (interior nodes only).

        Nodes on the boundary of omega count, since distances to omega are
        infima.  Point sets, and regions too thin to contain a node, are
        snapped to the nearest interior node.
        """
        if lattice.dim != self.dim:
            raise InvalidArgument(f"omega has dimension {self.dim}, lattice {lattice.dim}")
        out = np.zeros(lattice.shape, dtype=bool)
        if self.kind != "points":
            idx = lattice.interior_indices()
            hit = self.contains(lattice.node_coords(idx), closed=True)
            out[tuple(idx[hit].T)] = True
        if not out.any():
            lo, hi = self.bounds
            seeds = self.points if self.kind == "points" else [0.5 * (lo + hi)]
            for p in seeds:
                out[lattice.nearest_interior(p)] = True
        return out

    def sample(self, n: int) -> np.ndarray:
        """``n`` deterministic quasi-uniform points inside the region."""
        if n < 1:
            raise InvalidArgument("need at least one sample point")
        if self.kind == "points":
            reps = int(np.ceil(n / len(self.points)))
            return np.tile(self.points, (reps, 1))[:n]
        lo, hi = self.bounds
        if self.dim == 1 and self.kind in ("interval", "box", "ball"):
            return (lo + (hi - lo) * (np.arange(n) + 0.5) / n).reshape(-1, 1)
        sampler = qmc.Halton(d=self.dim, scramble=False)
        sampler.fast_forward(1)
        got: list[np.ndarray] = []
        total = 0
        for _ in range(1000):
            cand = lo + (hi - lo) * sampler.random(max(4 * n, 64))
            keep = cand[self.contains(cand)]
            got.append(keep)
            total += len(keep)
            if total >= n:
                break
        pts = np.concatenate(got)[:n]
        if len(pts) < n:
            raise InvalidArgument("omega is too thin to place the requested samples")
        return pts

    def describe(self) -> dict:
        if self.kind in ("interval", "box"):
            return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}
        if self.kind == "points":
            return {"kind": "points", "points": self.points.tolist()}
        return {"kind": "predicate", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


# -- file formats -------------------------------------------------------------

def read_mask(path) -> np.ndarray:
    """Read a text grid of 0/1 rows; row k holds the nodes with second index k."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split() if " " in line or "," in line else list(line)
        tokens = [t for tok in tokens for t in tok.split(",") if t]
        try:
            rows.append([int(t) for t in tokens])
        except ValueError as exc:
            raise InvalidArgument(f"{path}: mask rows must contain only 0/1") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidArgument(f"{path}: mask rows must be non-empty and equally long")
    arr = np.array(rows, dtype=int)
    if not np.isin(arr, (0, 1)).all():
        raise InvalidArgument(f"{path}: mask entries must be 0 or 1")
    arr = arr.astype(bool)
    return arr[0] if arr.shape[0] == 1 else arr.T


def write_mask(path, mask: np.ndarray) -> None:
    m = np.asarray(mask, dtype=bool)
    rows = [m.astype(int)] if m.ndim == 1 else m.T.astype(int)
    Path(path).write_text("\n".join("".join(str(v) for v in r) for r in rows) + "\n")


def domain_from_dict(spec: dict, base_dir=None) -> Domain:
    kind = spec.get("kind")
    try:
        if kind == "interval":
            return Domain.interval(float(spec["a"]), float(spec["b"]))
        if kind == "rectangle":
            return Domain.rectangle(float(spec["Lx"]), float(spec["Ly"]))
        if kind == "disk":
            return Domain.disk(float(spec["R"]))
        if kind == "grid_mask":
            mpath = Path(spec["mask_path"])
            if base_dir is not None and not mpath.is_absolute():
                mpath = Path(base_dir) / mpath
            return Domain.grid(read_mask(mpath), float(spec["h"]), spec.get("origin"))
        if kind == "l_shape":
            return l_shape(float(spec["h"]))
    except KeyError as exc:
        raise InvalidArgument(f"domain of kind {kind!r} is missing key {exc}") from exc
    raise InvalidArgument(f"unknown domain kind {kind!r}; expected one of {KINDS}")


def load_domain(path) -> Domain:
    """Load a domain description file (YAML mapping with a ``kind`` key)."""
    path = Path(path)
    spec = yaml.safe_load(path.read_text())
    if not isinstance(spec, dict):
        raise InvalidArgument(f"{path}: expected a mapping")
    return domain_from_dict(spec, base_dir=path.parent)


def region_from_dict(spec: dict, dim: int) -> Region:
    kind = spec.get("kind")
    try:
        if kind == "interval":
            return Region.interval(float(spec["a"]), float(spec["b"]))
        if kind == "box":
            return Region.box(spec["lower"], spec["upper"])
        if kind == "ball":
            return Region.ball(spec["center"], float(spec["radius"]))
        if kind == "points":
            return Region.from_points(spec["points"], dim)
    except KeyError as exc:
        raise InvalidArgument(f"omega of kind {kind!r} is missing key {exc}") from exc
    raise InvalidArgument(f"unknown omega kind {kind!r}")
