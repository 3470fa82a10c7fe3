import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from markovifs.attractor import (enumerate_cloud, error_bound, grid_for, iterate_attractor, iterations_for,
                                 piece_approx, project_word)
from markovifs.contractions import AffineMap, BoxSpec, MarkovIfs, compose_word
from markovifs.errors import DomainError, GuardError, InstanceError
from markovifs.instances import make_instance
from markovifs.setrep import VoxelSet, dilate, hausdorff_distance, rasterize_points
from markovifs.symbolic import TransitionMatrix

LADDER = make_instance("cube_ladder_r3").ifs
SIERPINSKI = make_instance("sierpinski").ifs


def halving():
    return MarkovIfs((AffineMap([[0.5]], [0.0]),), TransitionMatrix.full(1), BoxSpec((0,), (1,)), "half")


def segment(geometry, p, q, n=4000):
    t = np.linspace(0, 1, n)[:, None]
    return rasterize_points((1 - t) * np.asarray(p, float) + t * np.asarray(q, float), geometry)


def test_halving_map_shrinks_to_origin():
    ifs = halving()
    geo = VoxelSet.cube(1, 64)
    for k in (1, 2, 3, 4):
        X = iterate_attractor(ifs, geo, k, warm_start=False).pieces[0]
        # cells meeting [0, 2^-k]; the endpoint itself belongs to the lower cell (tie rule)
        meets = (np.arange(64) / 64) < 2.0 ** -k
        assert np.array_equal(X.occupancy, meets)
    A = iterate_attractor(ifs, geo, 12)
    assert A.union.indices().tolist() == [[0]]
    assert A.error_bound == pytest.approx(2.0 ** -12 + 1 / 64)


def test_error_bound_formula():
    A = iterate_attractor(SIERPINSKI, grid_for(SIERPINSKI, 32), 5)
    assert A.error_bound == pytest.approx(0.5 ** 5 * math.sqrt(2) + math.sqrt(2) / 32)
    assert A.certified_bound == pytest.approx(0.5 ** 5 * math.sqrt(2) + 2 * math.sqrt(2) / 32)
    assert A.union == A.pieces[0] | A.pieces[1] | A.pieces[2]
    assert error_bound(0.5, 3, 1.0, 0.1) == pytest.approx(0.225)


def test_iterations_for_target():
    assert iterations_for(SIERPINSKI, 2 ** -10 * math.sqrt(2), math.sqrt(2)) == 10
    with pytest.raises(DomainError):
        iterations_for(SIERPINSKI, 0, 1)


@pytest.mark.parametrize("block, p, q", [((1, 2), (0, 0, 0), (0, 0, 1)), ((3, 4), (0, 0, 0), (1, 0, 0))])
def test_ladder_blocks_give_segments(block, p, q):
    sub = LADDER.restrict(block)
    geo = grid_for(sub, 32)
    A = iterate_attractor(sub, geo, 30)
    ref = segment(geo, p, q)
    assert hausdorff_distance(A.union, ref) <= A.error_bound


def test_project_word_fixed_points():
    for n in (1, 5, 30):
        p, r = project_word(LADDER, (1,) * n)
        assert np.allclose(p, 0.0)
        assert r <= LADDER.lip_max ** n * math.sqrt(3) + 1e-15
    p, r = project_word(LADDER, (5,) * 60, x0=(0.7, 0.2, 0.9))
    assert np.allclose(p, (0, 0, 1), atol=1e-12) and r < 1e-12
    with pytest.raises(DomainError):
        project_word(LADDER, (1, 3))
    with pytest.raises(DomainError):
        project_word(LADDER, ())


def test_cloud_sizes():
    pts, r = enumerate_cloud(LADDER, 1, x0=(0.2, 0.3, 0.4))
    assert len(pts) == 6
    assert np.allclose(pts, [f(np.array([0.2, 0.3, 0.4])) for f in LADDER.maps])
    pts, _ = enumerate_cloud(SIERPINSKI, 8, x0=(0.0, 0.0))
    assert len(pts) == 3 ** 8
    # from a vertex every level-2 image is a distinct corner of a level-2 triangle
    small, _ = enumerate_cloud(SIERPINSKI, 2, x0=(0.0, 0.0))
    assert len(np.unique(np.round(small, 12), axis=0)) == 9
    with pytest.raises(GuardError, match="iterate_attractor"):
        enumerate_cloud(SIERPINSKI, 30)


def test_cloud_and_grid_agree_on_ladder(attractor):
    A = attractor("cube_ladder_r3", 64, 20)
    pts, radius = enumerate_cloud(LADDER, 10)
    cloud = rasterize_points(pts, A.union)
    assert hausdorff_distance(cloud, A.union) <= radius + A.union.cell_diagonal + A.certified_bound


@pytest.mark.parametrize("name", ["sierpinski", "cantor_square", "cantor_ladder", "two_blocks_disjoint"])
def test_cloud_and_grid_agree_on_planar_instances(name, attractor):
    ifs = make_instance(name).ifs
    A = attractor(name, 128, 14)
    pts, radius = enumerate_cloud(ifs, 7 if ifs.m > 4 else 9)
    cloud = rasterize_points(pts, A.union)
    assert hausdorff_distance(cloud, A.union) <= radius + A.union.cell_diagonal + A.certified_bound


def test_piece_of_single_symbol_is_base_piece(attractor):
    A = attractor("cube_ladder_r3", 32, 12)
    for i in range(1, 7):
        assert piece_approx(LADDER, (i,), A) == A.pieces[i - 1]


def test_nested_pieces(attractor):
    A = attractor("cube_ladder_r3", 32, 12)
    outer = piece_approx(LADDER, (3,), A)
    inner = piece_approx(LADDER, (3, 5), A)
    assert inner.issubset(dilate(outer, 2 * A.error_bound))
    # f3 f5 maps the unit cube into [0, 1/3] x [0, 1/9] x [1/4, 1/2]
    corners = np.array(np.meshgrid([0, 1], [0, 1], [0, 1], indexing="ij")).reshape(3, -1).T.astype(float)
    img = compose_word(LADDER, (3, 5))(corners)
    lo, hi = img.min(axis=0) - A.union.h, img.max(axis=0) + A.union.h
    c = inner.centers()
    assert np.all((c >= lo) & (c <= hi))
    assert np.allclose([img.min(axis=0), img.max(axis=0)], [[0, 0, 0.25], [1 / 3, 1 / 9, 0.5]])
    with pytest.raises(DomainError):
        piece_approx(LADDER, (1, 3), A)


def test_generations_decrease_up_to_slack():
    A = iterate_attractor(SIERPINSKI, grid_for(SIERPINSKI, 64), 10, warm_start=False, keep_history=True)
    slack = A.union.cell_diagonal
    for prev, cur in zip(A.history, A.history[1:]):
        assert cur.issubset(dilate(prev, slack + 1e-12))


def test_successive_changes_contract():
    A = iterate_attractor(SIERPINSKI, grid_for(SIERPINSKI, 64), 10, warm_start=False, keep_history=True)
    diag = A.union.cell_diagonal
    changes = [hausdorff_distance(a, b) for a, b in zip(A.history, A.history[1:])]
    for before, after in zip(changes, changes[1:]):
        assert after <= A.lip_max * before + 2 * diag + 1e-12


def test_warm_start_agrees_with_cold_start():
    geo = grid_for(SIERPINSKI, 128)
    warm = iterate_attractor(SIERPINSKI, geo, 12)
    cold = iterate_attractor(SIERPINSKI, geo, 12, warm_start=False)
    assert hausdorff_distance(warm.union, cold.union) <= warm.error_bound + cold.error_bound


def test_empty_subshift_and_escaping_maps_are_rejected():
    nil = MarkovIfs((AffineMap([[0.5]], [0.0]), AffineMap([[0.5]], [0.5])),
                    TransitionMatrix(((0, 1), (0, 0))), BoxSpec((0,), (1,)))
    with pytest.raises(InstanceError, match="empty subshift"):
        iterate_attractor(nil, VoxelSet.cube(1, 16), 3)
    out = MarkovIfs((AffineMap([[0.5]], [0.9]),), TransitionMatrix.full(1), BoxSpec((0,), (1,)))
    with pytest.raises(GuardError) as exc:
        iterate_attractor(out, VoxelSet.cube(1, 16), 3)
    assert exc.value.details["symbol"] == 1
    with pytest.raises(DomainError):
        iterate_attractor(halving(), VoxelSet.cube(1, 16), 0)


@settings(max_examples=15)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=12), st.tuples(st.floats(0, 1), st.floats(0, 1)))
def test_word_projection_radius_contains_limit(w, x0):
    # the fixed point of the last map is an attractor point reached by an extension of w
    tail = SIERPINSKI.maps[w[-1] - 1].fixed_point()
    p, r = project_word(SIERPINSKI, w, x0=np.array(x0))
    q, _ = project_word(SIERPINSKI, w, x0=tail)
    assert np.linalg.norm(p - q) <= r + 1e-12
