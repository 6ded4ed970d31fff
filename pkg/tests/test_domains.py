import math

import numpy as np
import pytest

from unicont.domains import (Domain, Region, as_points, domain_from_dict, l_shape, load_domain, read_mask,
                             region_from_dict, write_mask)
from unicont.errors import InvalidArgument


def test_as_points_shapes():
    pts, single = as_points(0.3, 1)
    assert pts.shape == (1, 1) and single
    pts, single = as_points([0.1, 0.2, 0.3], 1)
    assert pts.shape == (3, 1) and not single
    pts, single = as_points([0.1, 0.2], 2)
    assert pts.shape == (1, 2) and single
    with pytest.raises(InvalidArgument):
        as_points([[1.0, 2.0, 3.0]], 2)


@pytest.mark.parametrize("dom, inside, outside", [
    (Domain.interval(0, 1), 0.5, 1.0),
    (Domain.rectangle(2, 1), [1.0, 0.5], [2.5, 0.5]),
    (Domain.disk(1), [0.3, -0.4], [0.8, 0.8]),
])
def test_contains(dom, inside, outside):
    assert dom.contains(inside)
    assert not dom.contains(outside)


def test_clearance_analytic():
    assert Domain.interval(0, 1).clearance(0.3) == pytest.approx(0.3)
    assert Domain.rectangle(2, 1).clearance([1.0, 0.25]) == pytest.approx(0.25)
    assert Domain.disk(2).clearance([0.0, 1.5]) == pytest.approx(0.5)
    assert Domain.disk(1).contains_ball([0.0, 0.0], 0.99)
    assert not Domain.disk(1).contains_ball([0.5, 0.0], 0.6)


def test_measures():
    assert Domain.interval(1, 4).measure == 3
    assert Domain.rectangle(2, 3).measure == 6
    assert Domain.disk(1).measure == pytest.approx(math.pi)


@pytest.mark.parametrize("dom", [Domain.interval(0, 2), Domain.rectangle(1, 2), Domain.disk(1.5)])
def test_quadrature_measure(dom):
    _, w = dom.quadrature(32)
    assert np.sum(w) == pytest.approx(dom.measure, rel=1e-13)


def test_invalid_domains():
    with pytest.raises(InvalidArgument):
        Domain.interval(1, 1)
    with pytest.raises(InvalidArgument):
        Domain.rectangle(-1, 1)
    with pytest.raises(InvalidArgument):
        Domain.disk(0)
    with pytest.raises(InvalidArgument):
        Domain.grid(np.zeros((4, 4)), 0.1)


def test_l_shape_geometry():
    dom = l_shape(1 / 16)
    assert dom.contains([0.5, 0.5])
    assert dom.contains([1.5, 0.5])
    assert not dom.contains([1.5, 1.5])
    assert dom.measure == pytest.approx(3.0, rel=0.1)


def test_lattice_interior_strict():
    lat = Domain.interval(0, 1).lattice(0.25)
    assert lat.interior.tolist() == [False, True, True, True, False]


def test_region_sampling_deterministic():
    r = Region.ball([0.5, 0.5], 0.2)
    a, b = r.sample(30), r.sample(30)
    assert np.array_equal(a, b)
    assert np.all(r.contains(a))
    pts = Region.interval(0, 0.5).sample(8)
    assert pts[:, 0] == pytest.approx((np.arange(8) + 0.5) / 16)


def test_region_rasterize_snaps_thin_regions():
    lat = Domain.rectangle(1, 1).lattice(0.1)
    mask = Region.ball([0.52, 0.52], 0.01).rasterize(lat)
    assert mask.sum() == 1
    mask = Region.from_points([[0.33, 0.33], [0.71, 0.5]], 2).rasterize(lat)
    assert mask.sum() == 2


def test_mask_round_trip(tmp_path):
    mask = np.zeros((5, 4), dtype=bool)
    mask[1:4, 1:3] = True
    write_mask(tmp_path / "m.txt", mask)
    assert np.array_equal(read_mask(tmp_path / "m.txt"), mask)
    (tmp_path / "bad.txt").write_text("0102\n")
    with pytest.raises(InvalidArgument):
        read_mask(tmp_path / "bad.txt")


def test_domain_files(tmp_path):
    mask = np.ones((6, 6), dtype=bool)
    write_mask(tmp_path / "m.txt", mask)
    (tmp_path / "d.yaml").write_text("kind: grid_mask\nmask_path: m.txt\nh: 0.1\n")
    dom = load_domain(tmp_path / "d.yaml")
    assert dom.kind == "grid_mask" and dom.mask.sum() == 36
    assert domain_from_dict({"kind": "disk", "R": 2}).R == 2
    with pytest.raises(InvalidArgument):
        domain_from_dict({"kind": "rectangle", "Lx": 1})
    with pytest.raises(InvalidArgument):
        domain_from_dict({"kind": "torus"})
    assert region_from_dict({"kind": "interval", "a": 0, "b": 0.5}, 1).kind == "interval"
    with pytest.raises(InvalidArgument):
        region_from_dict({"kind": "blob"}, 2)
