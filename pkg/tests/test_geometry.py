import math

import numpy as np
import pytest

from unicont.domains import Domain, Region, l_shape
from unicont.errors import Infeasible, InvalidArgument
from unicont.geometry import (STENCIL_STRETCH, compute_t_max, geodesic_distance, geodesic_field, lattice_graph,
                              polyline_cover)


class TestField:
    def test_interval_distance(self):
        f = geodesic_field(Domain.interval(0, 1), Region.interval(0, 0.1), 1e-3)
        assert f.at(0.9) == pytest.approx(0.8, abs=1e-3)

    def test_zero_on_omega_and_inf_outside(self):
        dom = Domain.disk(1.0)
        f = geodesic_field(dom, Region.ball([0.0, 0.0], 0.2), 0.05)
        assert np.all(f.distance[f.source] == 0)
        assert np.all(np.isinf(f.distance[~f.lattice.interior]))

    def test_triangle_inequality_on_edges(self):
        dom = l_shape(1 / 16)
        f = geodesic_field(dom, Region.from_points([0.5, 1.5], 2), None)
        G = lattice_graph(f.lattice).tocoo()
        d = f.distance.ravel()
        assert np.all(d[G.row] <= d[G.col] + G.data + 1e-12)

    def test_dominates_euclidean(self):
        dom = l_shape(1 / 32)
        src = np.array([0.5, 1.5])
        f = geodesic_field(dom, Region.from_points(src, 2), None)
        idx = f.lattice.interior_indices()
        pts = f.lattice.node_coords(idx)
        d = f.distance[tuple(idx.T)]
        snapped = f.lattice.node_coords(np.array(f.node_of(src)))
        assert np.all(d >= np.linalg.norm(pts - snapped, axis=1) - 1e-12)

    def test_convex_within_stretch(self):
        sq = Domain.rectangle(1, 1)
        rng = np.random.default_rng(7)
        for _ in range(5):
            P, Q = 0.1 + 0.8 * rng.random(2), 0.1 + 0.8 * rng.random(2)
            d = geodesic_distance(sq, P, Q, 1 / 256)
            e = np.linalg.norm(P - Q)
            assert abs(d - e) <= STENCIL_STRETCH * e + 2 * math.sqrt(2) / 256

    def test_omega_outside(self):
        with pytest.raises(InvalidArgument):
            geodesic_field(Domain.rectangle(1, 1), np.zeros((3, 3), dtype=bool), 0.1)
        with pytest.raises(InvalidArgument):
            geodesic_distance(Domain.interval(0, 1), 1.5, 0.5, 0.01)


class TestDistance:
    def test_same_point(self):
        assert geodesic_distance(Domain.rectangle(1, 1), [0.3, 0.3], [0.3, 0.3], 1 / 64) == 0.0

    def test_l_shape_corner(self):
        d = geodesic_distance(l_shape(1 / 512), [1.5, 0.5], [0.5, 1.5])
        assert d == pytest.approx(math.sqrt(2), rel=0.02)

    def test_symmetric(self):
        dom = l_shape(1 / 64)
        a = geodesic_distance(dom, [1.7, 0.3], [0.2, 1.8])
        b = geodesic_distance(dom, [0.2, 1.8], [1.7, 0.3])
        assert a == pytest.approx(b, abs=2 / 64)


class TestTmax:
    def test_intervals(self):
        t = compute_t_max(Domain.interval(0, 1), Region.interval(0, 0.1), 1e-3)
        assert abs(t.value - 0.9) <= 1e-3
        t = compute_t_max(Domain.interval(0, math.pi), Region.interval(0, 0.5), 1e-3)
        assert abs(t.value - (math.pi - 0.5)) <= 1e-3

    def test_square_ball(self):
        t = compute_t_max(Domain.rectangle(1, 1), Region.ball([0.5, 0.5], 0.1), 1 / 128)
        assert abs(t.value - (math.sqrt(2) / 2 - 0.1)) <= t.error

    def test_monotone_in_omega(self):
        sq = Domain.rectangle(1, 1)
        vals = [compute_t_max(sq, Region.ball([0.4, 0.5], r), 1 / 64).value for r in (0.05, 0.1, 0.2, 0.35)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_monotone_on_nested_masks(self):
        dom = l_shape(1 / 32)
        lat = dom.lattice()
        coords = lat.node_coords(np.argwhere(np.ones(lat.shape, dtype=bool))).reshape(lat.shape + (2,))
        masks = [(coords[..., 0] < w) & (coords[..., 1] < w) & lat.interior for w in (0.3, 0.6, 0.9)]
        vals = [compute_t_max(dom, m).value for m in masks]
        assert vals[0] >= vals[1] >= vals[2]

    def test_refinement_on_l_shape(self):
        om = Region.from_points([0.5, 1.5], 2)
        vals = [compute_t_max(l_shape(1 / 2**k), om).value for k in range(4, 9)]
        diffs = np.abs(np.diff(vals))
        assert np.all(diffs[:-1] / diffs[1:] >= 1.5)


class TestCover:
    def test_interval(self):
        dom = Domain.interval(0, 1)
        f = geodesic_field(dom, Region.interval(0, 0.1), 1e-3)
        c = polyline_cover(f, 0.9, 0.95)
        assert c.violations(dom, 0.95) == []
        assert c.waypoints[-1, 0] == pytest.approx(0.9)
        assert c.total_radius < 0.95

    def test_infeasible(self):
        f = geodesic_field(Domain.interval(0, 1), Region.interval(0, 0.1), 1e-3)
        with pytest.raises(Infeasible):
            polyline_cover(f, 0.9, 0.5)

    def test_l_shape_bends_at_corner(self):
        dom = l_shape(1 / 128)
        f = geodesic_field(dom, Region.from_points([0.5, 1.5], 2))
        T = 1.1 * math.sqrt(2)
        c = polyline_cover(f, [1.5, 0.5], T)
        assert c.violations(dom, T) == []
        assert f.lattice.interior[f.node_of(c.waypoints[0])]
        assert c.waypoints[-1] == pytest.approx([1.5, 0.5])
        # the chain must pass through the lower-left square around the reentrant corner
        assert np.any(np.all(c.waypoints < 1.0, axis=1))
        # segments stay inside their balls
        steps = np.linalg.norm(np.diff(c.waypoints, axis=0), axis=1)
        assert np.all(steps < c.radii[:-1])
