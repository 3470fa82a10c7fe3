import math

import numpy as np
import pytest
from matplotlib.path import Path
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

from markovifs.analysis import separating_curve
from markovifs.errors import DomainError, GeometryError, GuardError
from markovifs.setrep import VoxelSet
from generators import disk, separated_pair


def curve_misses_cells(curve, A, step_cells=0.05):
    """Dense samples of the polyline all lie outside every closed occupied cell (sup-norm > h/2)."""
    p = curve.polyline
    pts = [p[:1]]
    for a, b in zip(p[:-1], p[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / (step_cells * A.h))))
        t = np.linspace(0, 1, n + 1)[1:, None]
        pts.append(a + t * (b - a))
    d, _ = cKDTree(A.centers()).query(np.concatenate(pts), p=np.inf)
    return bool(d.min() > A.h / 2)


def parity(curve, p):
    return Path(curve.polyline[:-1]).contains_point(p)


def check(curve, A):
    assert np.allclose(curve.polyline[0], curve.polyline[-1])
    assert curve_misses_cells(curve, A)
    assert parity(curve, curve.x) != parity(curve, curve.y)


def test_two_single_cells_give_a_small_loop():
    occ = np.zeros((64, 64), bool)
    occ[10, 10] = occ[50, 40] = True
    A = VoxelSet((0, 0), (1, 1), occ)
    x, y = A.centers([(10, 10)])[0], A.centers([(50, 40)])[0]
    c = separating_curve(A, x, y)
    check(c, A)
    assert c.encloses == "x"
    extent = c.polyline.max(axis=0) - c.polyline.min(axis=0)
    assert np.all(extent <= 2 * c.level + A.h)


def test_two_disks_contour_at_a_third_of_the_gap():
    # disks of radius 0.1 whose centres are 1.0 apart leave a gap of 0.8
    side = 280
    A = VoxelSet((0, 0), (1.4, 1.4), np.zeros((side, side), bool))
    h = A.h
    occ = disk((side, side), (0.2 / h - 0.5, 0.7 / h - 0.5), 0.1 / h) | disk((side, side), (1.2 / h - 0.5, 0.7 / h - 0.5), 0.1 / h)
    A = A.with_occupancy(occ)
    c = separating_curve(A, (0.2, 0.7), (1.2, 0.7))
    check(c, A)
    assert c.gap == pytest.approx(0.8, abs=2 * h)
    assert c.level == pytest.approx(0.8 / 3, abs=h)
    r = np.linalg.norm(c.polyline - (0.2, 0.7), axis=1)
    assert np.all(np.abs(r - (0.1 + 0.8 / 3)) < 2 * h)


def test_horseshoe_component_gets_one_loop():
    side = 128
    shoe = disk((side, side), (64, 64), 30, inner=20)
    shoe[60:69, :64] = False
    other = disk((side, side), (64, 64), 8)
    A = VoxelSet((0, 0), (1, 1), shoe | other)
    x = A.centers([(64, 94)])[0]
    c = separating_curve(A, x, A.centers([(64, 64)])[0])
    check(c, A)
    assert c.encloses == "x"


def test_point_in_a_hole_is_enclosed_by_the_hole_loop():
    side = 128
    ring = disk((side, side), (64, 64), 30, inner=20)
    core = disk((side, side), (64, 64), 8)
    A = VoxelSet((0, 0), (1, 1), ring | core)
    c = separating_curve(A, A.centers([(64, 94)])[0], A.centers([(64, 64)])[0])
    check(c, A)
    assert c.encloses == "y"


def test_errors():
    occ = np.zeros((32, 32), bool)
    occ[4, 4:10] = True
    occ[5, 10] = True
    A = VoxelSet((0, 0), (1, 1), occ)
    with pytest.raises(DomainError, match="not separated"):
        separating_curve(A, A.centers([(4, 4)])[0], A.centers([(4, 9)])[0])
    with pytest.raises(GuardError, match="too coarse"):
        separating_curve(A, A.centers([(4, 4)])[0], A.centers([(5, 10)])[0])
    with pytest.raises(DomainError):
        separating_curve(A, (0.9, 0.9), A.centers([(5, 10)])[0])
    with pytest.raises(GeometryError):
        separating_curve(VoxelSet.cube(3, 8), (0, 0, 0), (1, 1, 1))


def test_svg_export():
    occ = np.zeros((32, 32), bool)
    occ[5, 5] = occ[25, 25] = True
    A = VoxelSet((0, 0), (1, 1), occ)
    c = separating_curve(A, A.centers([(5, 5)])[0], A.centers([(25, 25)])[0])
    svg = c.to_svg(A)
    assert svg.startswith("<?xml") and 'version="1.1"' in svg and c.svg_path() in svg
    assert c.svg_path().endswith(" Z")
    assert c.to_dict()["vertices"] == len(c.polyline) - 1


@settings(max_examples=12)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_separations(seed):
    occ, x, y, _ = separated_pair(np.random.default_rng(seed), side=128, gap=4)
    A = VoxelSet((0, 0), (1, 1), occ)
    c = separating_curve(A, A.centers([x])[0], A.centers([y])[0])
    check(c, A)
    assert c.disjoint_from_cells
