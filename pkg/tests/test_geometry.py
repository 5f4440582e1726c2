import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcapture import geometry as geo
from kcapture import oracle
from kcapture.errors import (CoincidentPointError, DegenerateHullError, DimensionMismatchError,
                             HellyBoundError, NotInteriorError)

# [DERIVED] area of the pentagon 2-Hull, from khull_mask_by_sampling on a 1000x1000 grid
# (0.346573) and cross-checked against the exact polygon (0.346893)
PENTAGON_2HULL_AREA = 0.346893
PENTAGON_2HULL_MASK_AREA = 0.346573


def _segment_distance(x, a, b):
    ab = b - a
    t = np.clip(((x - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(x - (a + t[:, None] * ab), axis=1)


def _boundary_distance(X, poly):
    V = np.array(poly)
    return np.min([_segment_distance(X, V[i], V[(i + 1) % len(V)]) for i in range(len(V))], axis=0)


def _inside_convex(X, poly):
    V = np.array(poly)
    ok = np.ones(len(X), dtype=bool)
    for i in range(len(V)):
        a, b = V[i], V[(i + 1) % len(V)]
        cross = (b[0] - a[0]) * (X[:, 1] - a[1]) - (b[1] - a[1]) * (X[:, 0] - a[0])
        ok &= cross >= 0
    return ok


# ------------------------------------------------------------------ depth


def test_pentagon_centroid_depth_is_two(pentagon):
    # [DERIVED] 10^5-direction sampling oracle gives 2
    res = geo.halfspace_depth(pentagon, [0.0, 0.0])
    assert res.depth == 2
    assert oracle.depth_by_sampling(pentagon, [0.0, 0.0]) == 2


def test_depth_witness_certifies_count(pentagon):
    res = geo.halfspace_depth(pentagon, [0.0, 0.0])
    u = res.witness_direction
    assert abs(np.linalg.norm(u) - 1.0) < 1e-12
    assert int(np.sum(pentagon @ u >= -geo.EPS_GEOM)) == res.depth


def test_square_center_depth_is_two(square):
    # [DERIVED] sampling oracle agrees
    assert geo.halfspace_depth(square, [0.0, 0.0]).depth == 2
    assert oracle.depth_by_sampling(square, [0.0, 0.0]) == 2


def test_depth_outside_hull_is_zero(pentagon):
    # [TRIVIAL]
    assert geo.halfspace_depth(pentagon, [3.0, 0.5]).depth == 0


def test_depth_dimension_mismatch(square):
    with pytest.raises(DimensionMismatchError):
        geo.halfspace_depth(square, [0.0, 0.0, 0.0])


def test_depth_flags_coincident_point(square):
    res = geo.halfspace_depth(square, [1.0, 0.0])
    assert res.flagged


def test_depth_3d_tetrahedron_centroid():
    # [TRIVIAL] every plane through the centroid of a simplex leaves >= 1 vertex per side
    T = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    assert geo.halfspace_depth(T, [0.0, 0.0, 0.0]).depth == 1
    assert oracle.depth_by_sampling(T, [0.0, 0.0, 0.0], num_dirs=20000) == 1


# ------------------------------------------------------------------ interior test


def test_pentagon_centroid_in_2hull(pentagon):
    assert geo.in_khull_interior(pentagon, [0.0, 0.0], 2)


def test_edge_midpoint_not_in_1hull_interior(pentagon):
    mid = 0.5 * (pentagon[0] + pentagon[1])
    assert not geo.in_khull_interior(pentagon, mid, 1)


def test_strict_inside_convex_hull_is_1hull_interior(pentagon):
    assert geo.in_khull_interior(pentagon, [0.1, -0.2], 1)


def test_helly_bound_error_names_bound(pentagon):
    with pytest.raises(HellyBoundError, match="ceil"):
        geo.in_khull_interior(pentagon, [0.0, 0.0], 3)


def test_helly_bound_values():
    assert geo.helly_bound(5, 2) == 2
    assert geo.helly_bound(9, 2) == 3
    assert geo.helly_bound(8, 3) == 2


# ------------------------------------------------------------------ k-Hull polygon


def test_1hull_is_convex_hull(pentagon):
    poly = np.array(geo.khull_boundary_2d(pentagon, 1))
    assert len(poly) == 5
    for v in pentagon:
        assert np.min(np.linalg.norm(poly - v, axis=1)) < 1e-12


def test_1hull_drops_interior_points(pentagon):
    S = np.vstack([pentagon, [[0.1, 0.1]]])
    poly = np.array(geo.khull_boundary_2d(S, 1))
    assert len(poly) == 5


def test_pentagon_2hull_matches_membership_grid(pentagon):
    poly = geo.khull_boundary_2d(pentagon, 2)
    assert len(poly) == 5
    assert geo.polygon_area(poly) == pytest.approx(PENTAGON_2HULL_AREA, abs=1e-6)
    # vertices counterclockwise
    assert geo.polygon_area(poly) > 0
    xs = np.linspace(-0.5, 0.5, 1000)
    ys = np.linspace(-0.5, 0.5, 1000)
    cell = xs[1] - xs[0]
    mask = oracle.khull_mask_by_sampling(pentagon, 2, xs, ys)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    exact = _inside_convex(pts, poly)
    disagree = pts[mask.ravel() != exact]
    if disagree.size:
        assert _boundary_distance(disagree, poly).max() <= math.sqrt(2) * cell
    assert mask.sum() * cell * cell == pytest.approx(PENTAGON_2HULL_MASK_AREA, abs=2e-3)


def test_pentagon_2hull_vertices_on_diagonals(pentagon):
    poly = geo.khull_boundary_2d(pentagon, 2)
    # each vertex is where two diagonals cross, at radius cos(72)/cos(36)
    r = math.cos(2 * math.pi / 5) / math.cos(math.pi / 5)
    for v in poly:
        assert np.linalg.norm(v) == pytest.approx(r, abs=1e-9)


def test_square_with_center_2hull_is_center_point(square):
    S = np.vstack([square, [[0.0, 0.0]]])
    poly = geo.khull_boundary_2d(S, 2, allow_degenerate=True)
    assert len(poly) == 1
    assert np.allclose(poly[0], [0.0, 0.0], atol=1e-12)
    # [DERIVED] membership grid contains the center and nothing far from it
    xs = np.linspace(-0.5, 0.5, 101)
    mask = oracle.khull_mask_by_sampling(S, 2, xs, xs)
    X, Y = np.meshgrid(xs, xs)
    assert mask[50, 50]
    assert np.hypot(X[mask], Y[mask]).max() <= 2 * (xs[1] - xs[0])


def test_degenerate_hull_reported_unless_allowed(square):
    S = np.vstack([square, [[0.0, 0.0]]])
    with pytest.raises(DegenerateHullError):
        geo.khull_boundary_2d(S, 2)


# ------------------------------------------------------------------ beta_max


def test_beta_three_symmetric_pursuers():
    ang = np.radians([0.0, 120.0, 240.0])
    radii = np.array([1.0, 3.0, 7.5])
    P = radii[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    res = geo.beta_max(P, [0.0, 0.0], 1)
    assert res.beta_max == pytest.approx(math.pi / 3, abs=1e-6)
    assert oracle.beta_by_grid(P, [0.0, 0.0], 1) == pytest.approx(math.pi / 3, abs=1e-4)


def test_beta_four_axis_pursuers(square):
    res = geo.beta_max(2 * square, [0.0, 0.0], 1)
    assert res.beta_max == pytest.approx(math.pi / 4, abs=1e-6)
    assert res.g_min == pytest.approx(math.cos(res.beta_max), abs=1e-12)
    assert oracle.beta_by_grid(square, [0.0, 0.0], 1) == pytest.approx(math.pi / 4, abs=1e-4)


def test_beta_outside_khull_raises_with_witness(pentagon):
    with pytest.raises(NotInteriorError) as exc:
        geo.beta_max(pentagon, [0.9, 0.0], 2)
    assert exc.value.direction is not None


def test_beta_3d_octahedron():
    # [DERIVED] axis pursuers in 3D: worst step points at a cube corner, cos = 1/sqrt(3)
    O = np.vstack([np.eye(3), -np.eye(3)])
    res = geo.beta_max(O, np.zeros(3), 1)
    assert res.g_min == pytest.approx(1 / math.sqrt(3), abs=1e-6)
    assert oracle.beta_by_grid(O, np.zeros(3), 1) == pytest.approx(res.beta_max, abs=1e-4)


# ------------------------------------------------------------------ cone


def test_in_cone_cases():
    q, axis = np.zeros(2), np.array([1.0, 0.0])
    assert geo.in_cone(q, axis, 0.5, [3.0, 0.0])
    edge = [math.cos(0.5), math.sin(0.5)]
    assert geo.in_cone(q, axis, 0.5, edge)
    assert not geo.in_cone(q, axis, 0.5, [math.cos(0.6), math.sin(0.6)])


def test_in_cone_zero_axis_is_everything():
    assert geo.in_cone(np.zeros(2), np.zeros(2), 0.1, [-1.0, 0.0])


# ------------------------------------------------------------------ properties

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _points(draw, n):
    return np.array([[draw(coords), draw(coords)] for _ in range(n)])


@st.composite
def point_sets(draw, lo=5, hi=9):
    n = draw(st.integers(lo, hi))
    P = _points(draw, n)
    q = np.array([draw(coords), draw(coords)])
    if np.min(np.linalg.norm(P - q, axis=1)) < 1e-3:
        q = q + 0.01
    return P, q


@given(point_sets())
def test_exact_depth_never_exceeds_sampled(data):
    P, q = data
    exact = geo.halfspace_depth(P, q).depth
    assert exact <= oracle.depth_by_sampling(P, q, num_dirs=4000)


@given(point_sets(), st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5),
       st.floats(0.1, 10))
def test_depth_invariant_under_similarity(data, phi, tx, ty, scale):
    P, q = data
    R = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    t = np.array([tx, ty])
    d0 = geo.halfspace_depth(P, q).depth
    d1 = geo.halfspace_depth(scale * P @ R.T + t, scale * q @ R.T + t).depth
    assert d0 == d1


@given(point_sets(7, 9))
def test_khull_interiors_are_nested(data):
    P, q = data
    flags = [geo.in_khull_interior(P, q, k) for k in range(1, geo.helly_bound(len(P), 2) + 1)]
    # once false, false for every larger k
    assert flags == sorted(flags, reverse=True)


@given(point_sets(5, 9))
def test_beta_is_invariant_under_radial_scaling(data):
    P, q = data
    if not geo.in_khull_interior(P, q, 1):
        return
    radii = np.linspace(0.5, 3.0, len(P))
    scaled = q + radii[:, None] * (P - q)
    b0 = geo.beta_max(P, q, 1).beta_max
    b1 = geo.beta_max(scaled, q, 1).beta_max
    assert b0 == pytest.approx(b1, abs=1e-9)


def test_coincident_strict_count_raises(square):
    with pytest.raises(CoincidentPointError):
        geo.min_strict_count(square, [1.0, 0.0])
