"""Interior geodesic distances, T_max and polyline ball covers.

Distances are shortest paths on the interior lattice with a 16-neighbour
stencil (axis, diagonal and knight moves) weighted by Euclidean length.  An
edge is admitted only when every node in the bounding box of the move is
interior, so grid paths never cut across the boundary.  The stencil
overestimates straight-line lengths by at most ``STENCIL_STRETCH``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .domains import Domain, Lattice, Region, as_points
from .errors import Infeasible, InvalidArgument, ResolutionError

# worst ratio of stencil path length to Euclidean length: 1 / cos(atan(1/2) / 2)
STENCIL_STRETCH = math.sqrt(1 + (math.sqrt(5) - 2) ** 2) - 1

_OFFSETS = {
    1: [(1,)],
    2: [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)],
}


def _shifted(padded: np.ndarray, pad: int, offset) -> np.ndarray:
    sl = tuple(slice(pad + o, padded.shape[k] - pad + o) for k, o in enumerate(offset))
    return padded[sl]


def lattice_graph(lattice: Lattice) -> sp.csr_matrix:
    """Undirected weighted adjacency over all lattice nodes (flat C order)."""
    interior = lattice.interior
    dim = lattice.dim
    pad = 2
    padded = np.pad(interior, pad, constant_values=False)
    flat = np.arange(interior.size).reshape(interior.shape)
    rows, cols, vals = [], [], []
    for off in _OFFSETS[dim]:
        ok = interior.copy()
        ranges = [range(min(0, o), max(0, o) + 1) for o in off]
        for box in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(dim, -1).T:
            ok &= _shifted(padded, pad, box)
        src = flat[ok]
        idx = np.argwhere(ok) + np.array(off)
        dst = np.ravel_multi_index(tuple(idx.T), interior.shape)
        rows.append(src)
        cols.append(dst)
        vals.append(np.full(src.size, lattice.h * math.sqrt(sum(o * o for o in off))))
    n = interior.size
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


@dataclass(frozen=True, eq=False)
class GeodesicField:
    """Geodesic distance from a source set to every lattice node (``inf`` outside)."""

    domain: Domain
    lattice: Lattice
    source: np.ndarray
    distance: np.ndarray
    predecessors: np.ndarray

    @property
    def h(self) -> float:
        return self.lattice.h

    def node_of(self, point) -> tuple[int, ...]:
        pts, _ = as_points(point, self.lattice.dim)
        if not self.domain.contains(pts[0] if self.lattice.dim > 1 else pts[0, 0]):
            raise InvalidArgument(f"point {pts[0].tolist()} is outside the domain")
        idx = self.lattice.nearest_node(pts[0])
        if self.lattice.in_bounds(idx) and self.lattice.interior[idx]:
            return idx
        return self.lattice.nearest_interior(pts[0])

    def at(self, point) -> float:
        """Distance at the interior node nearest to ``point``."""
        return float(self.distance[self.node_of(point)])

    @property
    def t_max(self) -> float:
        return float(self.distance[self.lattice.interior].max())

    @property
    def error_bound(self) -> float:
        """Grid error of :attr:`t_max`: one node spacing per axis plus stencil stretch."""
        if self.lattice.dim == 1:
            return self.h
        return self.h * math.sqrt(self.lattice.dim) + STENCIL_STRETCH * self.t_max

    def path_to_source(self, point) -> np.ndarray:
        """Node coordinates of the shortest grid path from the source to ``point``."""
        node = np.ravel_multi_index(self.node_of(point), self.lattice.shape)
        if not np.isfinite(self.distance.flat[node]):
            raise Infeasible("point is not connected to omega")
        chain = [node]
        while self.predecessors[chain[-1]] >= 0:
            chain.append(self.predecessors[chain[-1]])
        idx = np.array(np.unravel_index(np.array(chain[::-1]), self.lattice.shape)).T
        return self.lattice.node_coords(idx)


def _source_mask(omega, lattice: Lattice) -> np.ndarray:
    if isinstance(omega, Region):
        mask = omega.rasterize(lattice)
    else:
        mask = np.asarray(omega, dtype=bool)
        if mask.shape != lattice.shape:
            raise InvalidArgument(f"omega mask shape {mask.shape} differs from lattice {lattice.shape}")
        mask = mask & lattice.interior
    if not mask.any():
        raise InvalidArgument("omega contains no interior lattice node")
    return mask


def geodesic_field(domain: Domain, omega, h: float | None = None) -> GeodesicField:
    """Multi-source shortest-path distances from ``omega`` over the interior lattice.

    ``omega`` is a :class:`Region` or a boolean mask on the lattice of spacing ``h``.
    """
    lattice = domain.lattice(h)
    source = _source_mask(omega, lattice)
    graph = lattice_graph(lattice)
    sources = np.flatnonzero(source.ravel())
    dist, pred, _ = dijkstra(graph, directed=False, indices=sources, min_only=True,
                             return_predecessors=True)
    dist = dist.reshape(lattice.shape)
    dist[~lattice.interior] = np.inf
    return GeodesicField(domain, lattice, source, dist, pred)


def geodesic_distance(domain: Domain, P, Q, h: float | None = None) -> float:
    """Geodesic distance between two points of the domain."""
    for name, pt in (("P", P), ("Q", Q)):
        if not domain.contains(pt):
            raise InvalidArgument(f"{name}={pt} is outside the domain")
    field = geodesic_field(domain, Region.from_points(Q, domain.dim), h)
    return field.at(P)


class TMax(NamedTuple):
    value: float
    error: float


def compute_t_max(domain: Domain, omega, h: float | None = None) -> TMax:
    """Largest geodesic distance from ``omega`` over the interior nodes."""
    field = geodesic_field(domain, omega, h)
    return TMax(field.t_max, field.error_bound)


@dataclass(frozen=True, eq=False)
class PolylineCover:
    """Ball centres ``x_0 .. x_M`` (``x_0`` in omega, ``x_M = P``) and radii ``t_0 .. t_M``."""

    waypoints: np.ndarray
    radii: np.ndarray

    @property
    def total_radius(self) -> float:
        return float(np.sum(self.radii))

    def violations(self, domain: Domain, T: float) -> list[str]:
        """List of broken cover invariants (empty when the cover is valid)."""
        out = []
        steps = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        if np.any(steps >= self.radii[:-1]):
            out.append("a waypoint leaves the previous ball")
        clr = np.atleast_1d(domain.clearance(self.waypoints if domain.dim > 1 else self.waypoints[:, 0]))
        if np.any(self.radii >= clr):
            out.append("a ball leaves the domain")
        if not self.total_radius < T:
            out.append(f"radii sum {self.total_radius} is not below T={T}")
        if np.any(self.radii <= 0):
            out.append("non-positive radius")
        return out


_SAFETY = 0.95
_REACH = 0.999
_MAX_BALLS = 200_000


def polyline_cover(field: GeodesicField, P, T: float) -> PolylineCover:
    """Chain of balls inside the domain leading from omega to ``P`` with radii summing below ``T``.

    The shortest grid path is walked from its omega end; each ball takes
    ``0.95`` of the local clearance and the next centre is where the path
    leaves ``0.999`` of that radius.
    """
    d = field.at(P)
    if not T > d:
        raise Infeasible(f"T={T} does not exceed the geodesic distance {d:.6g} of P to omega")
    domain = field.domain
    dim = field.lattice.dim
    target = as_points(P, dim)[0][0]
    path = field.path_to_source(P)
    path[-1] = target

    def clearance(p):
        return float(np.atleast_1d(domain.clearance(p if dim > 1 else p[0]))[0])

    centers = [path[0].copy()]
    radii = []
    seg, pos = 0, path[0].copy()
    floor = 1e-9 * field.h
    while True:
        c = centers[-1]
        gap = float(np.linalg.norm(target - c))
        if gap == 0.0:
            break
        clr = clearance(c)
        if clr <= floor:
            raise ResolutionError(f"path touches the boundary at {c.tolist()}")
        t = _SAFETY * clr
        reach = _REACH * t
        if gap < reach:
            radii.append(gap / _REACH)
            centers.append(target.copy())
            break
        exit_point = target.copy()
        while seg < len(path) - 1:
            B = path[seg + 1]
            if np.linalg.norm(B - c) >= reach:
                dvec = B - pos
                a = float(dvec @ dvec)
                b = 2.0 * float((pos - c) @ dvec)
                cc = float((pos - c) @ (pos - c)) - reach * reach
                u = (-b + math.sqrt(max(b * b - 4 * a * cc, 0.0))) / (2 * a)
                exit_point = pos + min(max(u, 0.0), 1.0) * dvec
                pos = exit_point.copy()
                break
            seg += 1
            pos = path[seg].copy()
        radii.append(t)
        centers.append(exit_point)
        if len(centers) > _MAX_BALLS:
            raise ResolutionError("cover needs too many balls; the path is pinched below grid resolution")
    used = float(np.sum(radii))
    last = min(0.5 * clearance(target), 0.5 * (T - used))
    if last <= 0:
        raise Infeasible(f"cover radii already sum to {used:.6g} >= T={T}")
    radii.append(last)
    return PolylineCover(np.array(centers), np.array(radii))
