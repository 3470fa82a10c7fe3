import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from markovifs.contractions import (AffineMap, BilinearQuad, ProductMap, certify_lipschitz, compose,
                                    compose_word, map_from_json, spectral_norm)
from markovifs.errors import CertificationError, DomainError, InstanceError
from markovifs.instances import make_instance
from oracles import pairwise_ratio_max

LADDER = make_instance("cube_ladder_r3").ifs
THIRD = 1 / 3
G1 = LADDER.maps[0].plane
G2 = LADDER.maps[2].plane
G3 = LADDER.maps[3].plane


def test_plane_maps_on_basis():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.allclose(G1(a), (a + b) / 3)
    assert np.allclose(G1(b), b / 3)
    assert np.allclose(G2(a), a / 3)
    assert np.allclose(G2(b), (a + b) / 3)
    corners = {(0, 0): a / 3, (0, 1): (2 * a + b) / 3, (1, 1): a + b / 3, (1, 0): a}
    for (u, v), img in corners.items():
        assert np.allclose(G3(np.array([u, v], float)), img)


def test_product_map_evaluation():
    assert np.allclose(LADDER.maps[0](np.array([1.0, 0.0, 0.0])), [THIRD, THIRD, 0.0])
    assert np.allclose(LADDER.maps[1](np.array([0.0, 0.0, 0.0]))[2], 0.5)
    assert np.allclose(LADDER.maps[1](np.array([0.0, 0.0, 1.0]))[2], 1.0)


def test_word_composition_matches_hand_product():
    w = compose_word(LADDER, (1, 1)).as_affine()
    m = np.zeros((3, 3))
    m[:2, :2] = G1.matrix
    m[2, 2] = 0.5
    assert np.allclose(w.matrix, m @ m)
    x = np.array([0.3, 0.7, 0.2])
    assert np.allclose(w(x), LADDER.maps[0](LADDER.maps[0](x)))


def test_word_lipschitz_bound_is_product():
    f = compose_word(LADDER, (3, 5))
    assert f.lip_bound == pytest.approx(LADDER.maps[2].lip_bound * LADDER.maps[4].lip_bound)
    x = np.random.default_rng(1).random((50, 3))
    assert np.allclose(f(x), LADDER.maps[2](LADDER.maps[4](x)))


def test_known_lipschitz_bounds():
    assert G2.lip_bound == pytest.approx((1 + math.sqrt(5)) / 6)
    assert G2.lip_bound == pytest.approx(0.539, abs=1e-3)
    assert G3.lip_bound == pytest.approx(math.sqrt(6) / 3)
    # brute-force check: operator norm of the Jacobian over a fine grid stays below the bound
    u = np.linspace(0, 1, 41)
    pts = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
    norms = np.linalg.norm(G3.jacobian(pts), ord=2, axis=(-2, -1))
    assert norms.max() <= G3.lip_bound + 1e-12
    assert pairwise_ratio_max(G3, pts[::37]) <= G3.lip_bound + 1e-12


def test_zero_map_has_zero_norm():
    assert spectral_norm(np.zeros((2, 2))) == 0.0
    assert AffineMap(np.zeros((3, 3)), np.ones(3)).lip_bound == 0.0


def test_certification_rejects_understated_bounds():
    with pytest.raises(CertificationError):
        AffineMap([[0.5, 0], [0, 0.5]], [0, 0], lip_bound=0.4)
    assert certify_lipschitz(G1) <= G1.lip_bound + 1e-9
    assert certify_lipschitz(G3) <= G3.lip_bound
    with pytest.raises(DomainError):
        certify_lipschitz(G1, density=1)


def test_certification_catches_bilinear_overclaim():
    class Liar(BilinearQuad):
        @property
        def lip_bound(self):
            return 0.1

    bad = Liar((0, 0), (1, 0), (1, 1), (0, 1))
    with pytest.raises(CertificationError) as exc:
        certify_lipschitz(bad)
    assert exc.value.details["witness"] is not None


def test_bilinear_with_parallelogram_corners_is_affine():
    f = BilinearQuad((0.1, 0.2), (0.5, 0.2), (0.6, 0.5), (0.2, 0.5))
    A = AffineMap([[0.4, 0.1], [0.0, 0.3]], [0.1, 0.2])
    pts = np.random.default_rng(2).random((100, 2))
    assert np.allclose(f(pts), A(pts))


def test_bilinear_bottom_edge_is_affine_in_u():
    u = np.linspace(0, 1, 11)
    pts = np.stack([u, np.zeros_like(u)], -1)
    img = G3(pts)
    assert np.allclose(img, (1 - u)[:, None] * G3.p00 + u[:, None] * G3.p10)


def test_bilinear_domain_and_inverse():
    with pytest.raises(DomainError):
        G3(np.array([1.5, 0.5]))
    pts = np.random.default_rng(3).random((40, 2))
    assert np.allclose(G3.inverse(G3(pts)), pts, atol=1e-10)


def test_fixed_points():
    for f in LADDER.maps:
        p = f.fixed_point()
        assert np.allclose(f(p), p, atol=1e-12)
    assert np.allclose(LADDER.maps[0].fixed_point(), 0.0)
    assert np.allclose(LADDER.maps[5].fixed_point(), [1.0, 0.0, 1.0])


def test_json_round_trip():
    for f in LADDER.maps:
        g = map_from_json(f.to_json())
        x = np.random.default_rng(4).random((10, 3))
        assert np.allclose(f(x), g(x))
        assert g.lip_bound == pytest.approx(f.lip_bound)
    with pytest.raises(InstanceError):
        map_from_json({"type": "spiral"})


def test_compose_needs_maps():
    with pytest.raises(DomainError):
        compose([])


def test_product_needs_planar_factor():
    with pytest.raises(DomainError):
        ProductMap(AffineMap([[0.5]], [0.0]), 0.5, 0.0)


contracting_matrices = st.lists(st.floats(-0.7, 0.7), min_size=4, max_size=4).map(
    lambda v: np.array(v).reshape(2, 2))


@given(contracting_matrices, st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_affine_bound_dominates_sampled_ratio(m, b):
    f = AffineMap(m, b)
    assert certify_lipschitz(f, density=5) <= f.lip_bound + 1e-9


@given(st.lists(st.lists(st.floats(0, 1), min_size=2, max_size=2), min_size=4, max_size=4))
def test_bilinear_bound_dominates_sampled_ratio(corners):
    f = BilinearQuad(*corners)
    pts = np.random.default_rng(0).random((60, 2))
    assert pairwise_ratio_max(f, pts) <= f.lip_bound + 1e-9


@given(st.lists(st.integers(1, 6), min_size=1, max_size=6))
def test_word_bound_is_submultiplicative(w):
    f = compose([LADDER.map(s) for s in w])
    assert f.lip_bound <= np.prod([LADDER.map(s).lip_bound for s in w]) + 1e-12
    pts = np.random.default_rng(5).random((30, 3))
    assert pairwise_ratio_max(f, pts) <= f.lip_bound + 1e-9
