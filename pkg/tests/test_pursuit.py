import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcapture import geometry as geo
from kcapture import oracle
from kcapture.engine import GameState
from kcapture.errors import IllegalMoveError, PreconditionError
from kcapture.pursuit import (PursuitParams, advance_move, advance_targets, break_collinearity,
                              collinear_groups, compute_closest_set, cone_decrease, cone_move,
                              cone_step_length_sq, k_capture_policy)


def _state(P, e):
    P = np.asarray(P, dtype=float)
    return GameState(0, np.asarray(e, dtype=float), P, np.ones(len(P), dtype=bool))


def _params(P, e, k):
    return PursuitParams.from_positions(P, e, k)


# ------------------------------------------------------------------ advance


def test_advance_straight_approach():
    # [TRIVIAL]
    x = advance_move([5.0, 0.0], [0.0, 0.0], [0.0, 0.0], 0.0)
    assert np.allclose(x, [4.0, 0.0])


def test_advance_parallel_keeps_distance():
    # [TRIVIAL]
    x = advance_move([3.0, 0.0], [0.0, 0.0], [1.0, 0.0], 3.0)
    assert np.allclose(x, [4.0, 0.0])


def test_advance_tangent_target_matches_scan():
    # [DERIVED] dense scan over the ray from e_new gives (1, 2)
    x = advance_move([0.0, 2.0], [0.0, 0.0], [1.0, 0.0], 0.0)
    ref = oracle.scan_advance([0.0, 2.0], [0.0, 0.0], [1.0, 0.0], 0.0)
    assert np.allclose(x, [1.0, 2.0], atol=1e-9)
    assert np.allclose(x, ref, atol=1e-4)


@given(st.floats(0, 2 * math.pi), st.floats(0.05, 8), st.floats(0, 2 * math.pi),
       st.floats(0, 1), st.floats(0, 10))
def test_advance_matches_scan_and_is_legal(phi, r, psi, u, d):
    p = r * np.array([math.cos(phi), math.sin(phi)])
    e_new = u * np.array([math.cos(psi), math.sin(psi)])
    if np.linalg.norm(p - e_new) < 1e-3:
        return
    x = advance_move(p, [0.0, 0.0], e_new, d)
    assert np.linalg.norm(x - p) <= 1.0 + 1e-12
    # on the line through e_new parallel to p - e_old, on the pursuer's side
    v = (x - e_new) @ (p / r)
    assert np.linalg.norm(x - e_new - v * p / r) < 1e-9
    assert v >= -1e-12
    ref = oracle.scan_advance(p, [0.0, 0.0], e_new, d, num=20001)
    assert abs(np.linalg.norm(x - e_new) - d) <= abs(np.linalg.norm(ref - e_new) - d) + 1e-3


def test_advance_vectorized_matches_single():
    P = np.array([[5.0, 0.0], [0.0, 2.0], [-3.0, 1.0]])
    X = advance_targets(P, [0.0, 0.0], [0.6, 0.8], [1.0, 0.0, 4.0])
    for p, d, x in zip(P, [1.0, 0.0, 4.0], X):
        assert np.allclose(advance_move(p, [0.0, 0.0], [0.6, 0.8], d), x)


def test_advance_rejects_long_evader_step():
    with pytest.raises(IllegalMoveError):
        advance_move([5.0, 0.0], [0.0, 0.0], [2.0, 0.0], 0.0)


# ------------------------------------------------------------------ cone


def test_cone_stationary_evader_unit_drop():
    # [TRIVIAL] u_e = 0: each member moves one unit straight in
    P = np.array([[3.0, 0.0], [0.0, 3.0]])
    X, s = cone_move(P, [0.0, 0.0], [0.0, 0.0])
    assert s == pytest.approx(2.0)
    assert np.allclose(np.linalg.norm(X - P, axis=1), 1.0)


def test_cone_head_on_drops_two():
    # [TRIVIAL] 1 * cos 0 + sqrt(1 - 0) = 2
    assert cone_decrease(1.0, 0.0) == pytest.approx(2.0)
    X, s = cone_move(np.array([[5.0, 0.0]]), [0.0, 0.0], [1.0, 0.0])
    assert s == pytest.approx(3.0)
    assert np.allclose(X, [[4.0, 0.0]])


def test_cone_thirty_degrees_drops_sqrt3():
    # [DERIVED] cos 30 + sqrt(1 - sin^2 30) = sqrt(3)
    assert cone_decrease(1.0, math.radians(30)) == pytest.approx(math.sqrt(3), abs=1e-12)
    th = math.radians(30)
    p = 4.0 * np.array([math.cos(th), math.sin(th)])
    X, s = cone_move(p[None, :], [0.0, 0.0], [1.0, 0.0])
    assert s == pytest.approx(4.0 - math.sqrt(3), abs=1e-12)
    assert np.linalg.norm(X[0] - p) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.0, 1.2), st.floats(0.0, 1.0), st.floats(2.5, 9))
def test_cone_member_step_matches_closed_form(u, theta_1, frac, r):
    theta_j = frac * theta_1
    P = r * np.array([[math.cos(theta_1), math.sin(theta_1)],
                      [math.cos(theta_j), -math.sin(theta_j)]])
    e_new = np.array([u, 0.0])
    X, s = cone_move(P, [0.0, 0.0], e_new)
    # binding member steps exactly 1, the other as the closed form says
    assert np.linalg.norm(X[0] - P[0]) == pytest.approx(1.0, abs=1e-9)
    step_sq = float(np.sum((X[1] - P[1]) ** 2))
    assert step_sq == pytest.approx(cone_step_length_sq(u, theta_j, theta_1), abs=1e-9)
    assert step_sq <= 1.0 + 1e-12
    assert r - s >= cone_decrease(u, theta_1) - 1e-9


def test_cone_step_length_never_exceeds_one():
    # charging straight along this member's line lets it stay put
    assert cone_step_length_sq(1.0, 0.0, math.pi / 3) == pytest.approx(0.0, abs=1e-12)


def test_cone_landing_rule():
    P = np.array([[0.5, 0.0], [0.0, 0.5]])
    X, s = cone_move(P, [0.0, 0.0], [0.0, 0.0])
    assert s == 0.0
    assert np.allclose(X, 0.0)


# ------------------------------------------------------------------ closest set


def test_closest_set_pair():
    P = np.array([[3.0, 0.0], [0.0, 3.0], [5.0, 0.0]])
    cs = compute_closest_set(P, [0.0, 0.0], eps_closest=1e-6)
    assert cs.indices == (0, 1)
    assert cs.d_min == 3.0


def test_closest_set_tolerance_cluster():
    P = np.array([[3.0, 0.0], [0.0, 3.0 + 1e-7], [5.0, 0.0]])
    assert compute_closest_set(P, [0.0, 0.0], eps_closest=1e-6).indices == (0, 1)


def test_closest_set_all_equal():
    ang = np.linspace(0, 2 * math.pi, 6, endpoint=False)
    P = 2.0 * np.column_stack([np.cos(ang), np.sin(ang)])
    assert compute_closest_set(P, [0.0, 0.0]).indices == tuple(range(6))


# ------------------------------------------------------------------ policy


def _hexagon(r=3.0):
    ang = np.linspace(0, 2 * math.pi, 6, endpoint=False) + 0.1
    return r * np.column_stack([np.cos(ang), np.sin(ang)])


def test_policy_equidistant_k_in_cone_get_cone_moves():
    P = _hexagon()
    e = np.zeros(2)
    params = _params(P, e, 2)
    moves = k_capture_policy(_state(P, e), np.array([1.0, 0.0]), params)
    kinds = [m.kind for m in moves]
    assert kinds.count("cone") == 2
    assert set(kinds) <= {"cone", "parallel"}
    group = [i for i, m in enumerate(moves) if m.kind == "cone"]
    for i in range(6):
        new_d = np.linalg.norm(moves[i].target - [1.0, 0.0])
        if i in group:
            assert new_d <= 3.0 - params.cos_beta + 1e-9
        else:
            assert new_d == pytest.approx(3.0, abs=1e-12)


def test_policy_far_pursuer_advances_or_joins():
    P = _hexagon()
    P[0] = 5.0 * P[0] / 3.0
    e = np.zeros(2)
    params = _params(P, e, 2)
    axis = P[0] / np.linalg.norm(P[0])
    moves = k_capture_policy(_state(P, e), 0.5 * axis, params)
    assert moves[0].kind == "advance"
    before = 5.0
    after = np.linalg.norm(moves[0].target - 0.5 * axis)
    assert after <= before - params.cos_beta + 1e-9 or after <= 3.0 + 1e-9


def test_policy_stationary_evader_cone_fires():
    # [DERIVED] zero step: the cone is all of space and the group drops by 1
    P = _hexagon()
    e = np.zeros(2)
    moves = k_capture_policy(_state(P, e), e, _params(P, e, 2))
    cone = [m for m in moves if m.kind == "cone"]
    assert len(cone) == 2
    for m in cone:
        assert np.linalg.norm(m.target) == pytest.approx(2.0, abs=1e-12)


def test_policy_preserves_orientation():
    P = _hexagon()
    P[2] *= 1.7
    e = np.zeros(2)
    e_new = np.array([0.3, -0.4])
    moves = k_capture_policy(_state(P, e), e_new, _params(P, e, 2))
    for p, m in zip(P, moves):
        v0 = p / np.linalg.norm(p)
        v1 = (m.target - e_new) / np.linalg.norm(m.target - e_new)
        assert np.linalg.norm(v0 - v1) < 1e-12
        assert np.linalg.norm(m.target - p) <= 1.0 + 1e-12


def test_params_reject_bad_alpha():
    with pytest.raises(PreconditionError):
        PursuitParams(k=1, n=3, beta_max=0.5, alpha_perturb=0.1)


# ------------------------------------------------------------------ perturbation


def test_break_collinearity_single_pair():
    P = np.array([[2.0, 0.0], [4.0, 0.0], [-2.0, 2.0], [-2.0, -2.0], [0.0, 3.0], [0.0, -3.0]])
    e = np.zeros(2)
    params = _params(P, e, 2)
    e_new = np.array([0.0, 0.5])
    moves = break_collinearity(_state(P, e), e_new, params)
    X = np.array([m.target for m in moves])
    a = (X[0] - e_new) / np.linalg.norm(X[0] - e_new)
    b = (X[1] - e_new) / np.linalg.norm(X[1] - e_new)
    angle = math.acos(np.clip(a @ b, -1, 1))
    # [DERIVED] direct angle computation after the move
    assert angle >= params.alpha_perturb * (1 - 1e-6)
    assert not collinear_groups(X, e_new)
    assert np.all(np.linalg.norm(X - P, axis=1) <= 1.0 + 1e-12)
    assert geo.in_khull_interior(X, e_new, 2)


def test_break_collinearity_stationary_evader_angle():
    P = np.array([[2.0, 0.0], [4.0, 0.0], [-2.0, 2.0], [-2.0, -2.0], [0.0, 3.0], [0.0, -3.0]])
    e = np.zeros(2)
    params = _params(P, e, 2)
    moves = break_collinearity(_state(P, e), e, params)
    X = np.array([m.target for m in moves])
    a, b = X[0] / np.linalg.norm(X[0]), X[1] / np.linalg.norm(X[1])
    angle = math.acos(np.clip(a @ b, -1, 1))
    assert angle >= params.alpha_perturb * (1 - 1e-6)


def test_break_collinearity_two_pairs_in_one_round():
    P = np.array([[2.0, 0.0], [4.0, 0.0], [0.0, 2.0], [0.0, 5.0], [-3.0, -1.0], [1.0, -3.0]])
    e = np.zeros(2)
    params = _params(P, e, 2)
    assert len(collinear_groups(P, e)) == 2
    moves = break_collinearity(_state(P, e), e, params)
    X = np.array([m.target for m in moves])
    assert not collinear_groups(X, e)
    assert sum(m.kind == "perturb" for m in moves) == 2


def test_break_collinearity_noop_without_pairs():
    P = _hexagon()
    e = np.zeros(2)
    assert break_collinearity(_state(P, e), e, _params(P, e, 2)) is None
