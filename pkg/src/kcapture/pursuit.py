"""Pursuer side of the unbounded game: Advance and Cone moves and the k-Capture policy.

Every move keeps each pursuer on the line through the evader's new position
parallel to its previous offset ``p_j - e``, so offsets never change
direction.  Orientation preservation is what keeps the evader inside the
pursuers' k-Hull for the whole game.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import DegenerateInstanceError, IllegalMoveError, PreconditionError

EPS_CLOSEST = 1e-7
EPS_CAP = 1e-9
ALPHA_PERTURB = 1e-4
SPEED_TOL = 1e-12
# rounding in x + unit step grows with |x|; allow a few ulps of the coordinates
SPEED_TOL_REL = 1e-14


def speed_tol(*points) -> float:
    """Slack on the unit speed limit at the magnitude of the given coordinates."""
    scale = max((float(np.max(np.abs(p))) for p in points), default=0.0)
    return max(SPEED_TOL, SPEED_TOL_REL * scale)


@dataclass
class PursuitParams:
    k: int
    n: int
    beta_max: float
    eps_closest: float = EPS_CLOSEST
    eps_cap: float = EPS_CAP
    alpha_perturb: float = ALPHA_PERTURB
    # True when the evader started outside the k-Hull; the cone then has
    # half angle arccos(max(g_min, 0)) and no capture guarantee applies
    degraded: bool = False

    def __post_init__(self):
        if self.k < 1 or self.k > self.n:
            raise PreconditionError(f"k={self.k} must lie in [1, n={self.n}]")
        if not 0.0 < self.alpha_perturb <= 1e-3:
            raise PreconditionError("alpha_perturb must lie in (0, 1e-3]")
        if self.eps_cap < 0:
            raise PreconditionError("eps_cap must be nonnegative")
        if not self.degraded and not 0.0 < self.beta_max < math.pi / 2:
            raise PreconditionError(f"beta_max={self.beta_max} must lie in (0, pi/2)")

    @property
    def cos_beta(self) -> float:
        return math.cos(self.beta_max)

    @classmethod
    def from_positions(cls, pursuers, e, k: int, **kw) -> "PursuitParams":
        """Cache beta_max for the current configuration.

        If e is not strictly inside the k-Hull the parameters are marked
        degraded instead of raising, so the policy can still be played.
        """
        P = geo.as_points(pursuers)
        res = geo.kth_cosine_min(P, e, k)
        if res.g_min > geo.EPS_GEOM:
            return cls(k=k, n=P.shape[0], beta_max=math.acos(min(res.g_min, 1.0)), **kw)
        return cls(k=k, n=P.shape[0], beta_max=math.acos(max(res.g_min, 0.0)), degraded=True, **kw)


@dataclass(frozen=True)
class ClosestSet:
    indices: tuple[int, ...]
    d_min: float


@dataclass
class PursuerMove:
    kind: str
    target: np.ndarray
    d: float | None = None
    group: tuple[int, ...] | None = None
    angle: float | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.d is not None:
            out["d"] = float(self.d)
        if self.group is not None:
            out["group"] = [int(i) for i in self.group]
        if self.angle is not None:
            out["angle"] = float(self.angle)
        return out


def advance_targets(P, e_old, e_new, d) -> np.ndarray:
    """Vectorized Advance move for every row of ``P`` with per-row targets ``d``.

    Each pursuer goes to the point of the line through ``e_new`` parallel to
    ``p - e_old`` whose distance to ``e_new`` is closest to d, within one
    unit of p.  Only the ray on the pursuer's own side (s >= 0) is used.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    e_old = np.asarray(e_old, dtype=float)
    e_new = np.asarray(e_new, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), (P.shape[0],))
    V = P - e_old
    r = np.sqrt(np.einsum("ij,ij->i", V, V))
    if np.any(r <= geo.EPS_LOC):
        raise PreconditionError("pursuer coincides with the evader")
    if np.any(d < 0):
        raise PreconditionError("advance parameter d must be nonnegative")
    D = V / r[:, None]
    w = e_new - e_old
    if float(np.linalg.norm(w)) > 1.0 + speed_tol(e_old, e_new):
        raise IllegalMoveError("evader step longer than one unit", agent="evader")
    # s is the distance from e_new along D; x - p = w + (s - r) D, so |x - p| <= 1
    # holds for s in r - b -+ sqrt(b^2 - |w|^2 + 1) with b = w . D
    b = D @ w
    disc = b * b - float(w @ w) + 1.0
    if np.any(disc < -1e-12):
        raise IllegalMoveError("evader step longer than one unit", agent="evader")
    root = np.sqrt(np.maximum(disc, 0.0))
    lo = np.maximum(r - b - root, 0.0)
    hi = r - b + root
    s = np.minimum(np.maximum(d, lo), hi)
    return e_new + s[:, None] * D


def advance_move(p, e_old, e_new, d: float) -> np.ndarray:
    """Single-pursuer form of :func:`advance_targets`."""
    return advance_targets(np.asarray(p, dtype=float)[None, :], e_old, e_new, d)[0]


def cone_move(positions, e_old, e_new, beta_max: float | None = None,
              eps_closest: float = EPS_CLOSEST) -> tuple[np.ndarray, float]:
    """Joint move of an equidistant group inside the cone.

    Each member stays on its own line through ``e_new``; all members end at
    the smallest common distance that every one of them can reach in one
    unit step (zero if they can all reach the evader).  The binding member is
    the one with the largest angle to the evader's step.

    Returns the new positions and the common distance.
    """
    P = np.atleast_2d(np.asarray(positions, dtype=float))
    e_old = np.asarray(e_old, dtype=float)
    e_new = np.asarray(e_new, dtype=float)
    V = P - e_old
    r = np.linalg.norm(V, axis=1)
    if np.any(r <= geo.EPS_LOC):
        raise PreconditionError("cone group member coincides with the evader")
    if float(r.max() - r.min()) > eps_closest:
        raise PreconditionError(
            f"cone group distances differ by {r.max() - r.min():.3e} > eps_closest"
        )
    D = V / r[:, None]
    w = e_new - e_old
    u = float(np.linalg.norm(w))
    if u > 1.0 + speed_tol(e_old, e_new):
        raise IllegalMoveError("evader step longer than one unit", agent="evader")
    if beta_max is not None and u > 0.0:
        for j in range(P.shape[0]):
            if not geo.in_cone(e_old, w, beta_max, P[j]):
                raise PreconditionError(f"cone group member {j} lies outside the cone")
    b = D @ w
    root = np.sqrt(np.maximum(b * b - u * u + 1.0, 0.0))
    # each member's own reach toward e_new: r - (u cos(theta) + sqrt(1 - u^2 sin^2(theta)))
    s = max(float(np.max(r - b - root)), 0.0)
    return e_new + s * D, s


def cone_step_length_sq(u: float, theta_j: float, theta_1: float) -> float:
    """Squared step of a non-binding cone member (theta_j <= theta_1).

    Derived from the parallel-line construction with equal final distances:
    1 - 2u(cos theta_j - cos theta_1)(u cos theta_1 + sqrt(1 - u^2 sin^2 theta_1)).
    """
    c1, cj = math.cos(theta_1), math.cos(theta_j)
    q1 = math.sqrt(max(1.0 - (u * math.sin(theta_1)) ** 2, 0.0))
    return 1.0 - 2.0 * u * (cj - c1) * (u * c1 + q1)


def cone_decrease(u: float, theta: float) -> float:
    """Distance gained by the binding member: u cos(theta) + sqrt(1 - u^2 sin^2(theta))."""
    return u * math.cos(theta) + math.sqrt(max(1.0 - (u * math.sin(theta)) ** 2, 0.0))


def compute_closest_set(pursuers, e, eps_closest: float = EPS_CLOSEST,
                        indices=None) -> ClosestSet:
    P = np.atleast_2d(np.asarray(pursuers, dtype=float))
    idx = np.arange(P.shape[0]) if indices is None else np.asarray(indices, dtype=int)
    if idx.size == 0:
        raise PreconditionError("no pursuers to rank")
    dist = np.linalg.norm(P[idx] - np.asarray(e, dtype=float), axis=1)
    d_min = float(dist.min())
    members = tuple(int(i) for i in idx[dist <= d_min + eps_closest])
    return ClosestSet(members, d_min)


def _angles_to_step(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(V, axis=1)
    u = float(np.linalg.norm(w))
    if u == 0.0:
        return np.zeros(V.shape[0])
    if V.shape[1] == 2:
        cross = V[:, 0] * w[1] - V[:, 1] * w[0]
        return np.abs(np.arctan2(cross, V @ w))
    return np.arccos(np.clip((V @ w) / (r * u), -1.0, 1.0))


def k_capture_policy(state, e_new, params: PursuitParams) -> list[PursuerMove]:
    """One round of the k-Capture strategy after the evader moved to ``e_new``.

    If at least k pursuers are both closest to the evader and inside the cone
    of half angle beta_max around the evader's step, the k with the smallest
    angles make a Cone move.  Closest pursuers left out move parallel to the
    evader; everyone else makes an Advance move toward distance d_min.
    """
    P = state.pursuers
    e_old = state.e
    e_new = np.asarray(e_new, dtype=float)
    w = e_new - e_old
    if float(np.linalg.norm(w)) > 1.0 + speed_tol(e_old, e_new):
        raise IllegalMoveError("evader step longer than one unit", agent="evader")
    alive = np.flatnonzero(state.alive)
    moves: list[PursuerMove | None] = [None] * P.shape[0]
    for i in np.flatnonzero(~state.alive):
        moves[i] = PursuerMove("dead", P[i].copy())

    closest = compute_closest_set(P, e_old, params.eps_closest, indices=alive)
    theta = np.zeros(P.shape[0])
    theta[alive] = _angles_to_step(P[alive] - e_old, w)
    in_cone = theta <= params.beta_max + geo.EPS_ANG
    candidates = [i for i in closest.indices if in_cone[i]]
    group: tuple[int, ...] = ()
    if len(candidates) >= params.k:
        ranked = sorted(candidates, key=lambda i: (theta[i], i))
        group = tuple(sorted(ranked[: params.k]))
        targets, _ = cone_move(P[list(group)], e_old, e_new, eps_closest=params.eps_closest)
        for i, x in zip(group, targets):
            moves[i] = PursuerMove("cone", x, group=group, angle=float(theta[i]))
    closest_set = set(closest.indices)
    rest = [int(i) for i in alive if moves[i] is None]
    if rest:
        is_closest = np.array([i in closest_set for i in rest])
        r = np.linalg.norm(P[rest] - e_old, axis=1)
        d = np.where(is_closest, r, closest.d_min)
        targets = advance_targets(P[rest], e_old, e_new, d)
        for i, c, di, x in zip(rest, is_closest, d, targets):
            moves[i] = PursuerMove("parallel" if c else "advance", x, d=float(di))
    return moves


def collinear_groups(pursuers, e, indices=None, eps_ang: float = geo.EPS_ANG) -> list[list[int]]:
    """Groups (size >= 2) of pursuers whose offsets from e share one direction."""
    P = np.atleast_2d(np.asarray(pursuers, dtype=float))
    idx = list(range(P.shape[0])) if indices is None else [int(i) for i in indices]
    V = P - np.asarray(e, dtype=float)
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos, i in enumerate(idx):
        for j in idx[a_pos + 1:]:
            if geo.angle_between(V[i], V[j]) < eps_ang:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in idx:
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values() if len(g) > 1]


def _rotation_plane(a: np.ndarray, hint: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair (a_hat, b) spanning a plane that contains a."""
    ah = a / np.linalg.norm(a)
    if a.shape[0] == 2:
        b = np.array([-ah[1], ah[0]])
        return ah, (-b if np.dot(hint, b) < 0 else b)
    b = hint - np.dot(hint, ah) * ah
    if np.linalg.norm(b) < 1e-12:
        _, _, vt = np.linalg.svd(ah[None, :])
        b = vt[-1]
    return ah, b / np.linalg.norm(b)


def _rotate_in_plane(x: np.ndarray, angle: float, hint: np.ndarray) -> np.ndarray:
    a, b = _rotation_plane(x, hint)
    return float(np.linalg.norm(x)) * (math.cos(angle) * a + math.sin(angle) * b)


def break_collinearity(state, e_new, params: PursuitParams,
                       max_halvings: int = 40) -> list[PursuerMove] | None:
    """Initial move that gives every pursuer a distinct direction from the evader.

    Everybody translates with the evader's step; within each collinear group
    all but the farthest pursuer turn their direction from the evader by
    rank * alpha, stepping to the nearest point of the turned ray.  alpha is
    halved until the evader is still inside the k-Hull and no collinear pair
    remains.  Returns None when there is nothing to break.
    """
    P = state.pursuers
    e_old = state.e
    e_new = np.asarray(e_new, dtype=float)
    alive = np.flatnonzero(state.alive)
    groups = collinear_groups(P, e_old, alive)
    if not groups:
        return None
    w = e_new - e_old
    rotated: dict[int, int] = {}
    for g in groups:
        by_dist = sorted(g, key=lambda i: (-float(np.linalg.norm(P[i] - e_old)), i))
        for rank, i in enumerate(by_dist[1:], start=1):
            rotated[i] = rank
    need_interior = not params.degraded
    alpha = params.alpha_perturb
    for _ in range(max_halvings + 1):
        targets = P.copy()
        targets[alive] = P[alive] + w
        angles = {}
        reach_ok = True
        for i, rank in rotated.items():
            # turn the offset direction by rank * alpha toward the side the
            # pursuer already sits on relative to e_new, then take the
            # nearest point of that ray
            v = P[i] - e_old
            rel = P[i] - e_new
            ray = _rotate_in_plane(v, rank * alpha, rel) / float(np.linalg.norm(v))
            s = float(rel @ ray)
            reach_ok &= s > geo.EPS_LOC
            targets[i] = e_new + max(s, 0.0) * ray
            angles[i] = rank * alpha
        ok = reach_ok and not collinear_groups(targets, e_new, alive)
        if ok and need_interior:
            ok = geo.in_khull_interior(targets[alive], e_new, params.k)
        tol = speed_tol(P[alive], e_new)
        if ok and all(np.linalg.norm(targets[i] - P[i]) <= 1.0 + tol for i in alive):
            moves = []
            for i in range(P.shape[0]):
                if not state.alive[i]:
                    moves.append(PursuerMove("dead", P[i].copy()))
                elif i in rotated:
                    moves.append(PursuerMove("perturb", targets[i], angle=angles[i]))
                else:
                    moves.append(PursuerMove("parallel", targets[i]))
            return moves
        alpha /= 2.0
    raise DegenerateInstanceError(
        f"could not break collinearity after {max_halvings} halvings of alpha"
    )


@dataclass
class KCapturePolicy:
    """Stateful wrapper: phase 0 perturbation, then k_capture_policy every round."""

    params: PursuitParams
    name: str = "k_capture"
    start_time: int = 0
    beta_history: list = field(default_factory=list)
    _first: bool = True
    _rebeta: bool = False

    def moves(self, state, e_new) -> list[PursuerMove]:
        if self._rebeta:
            alive = state.alive
            fresh = PursuitParams.from_positions(
                state.pursuers[alive], state.e, self.params.k,
                eps_closest=self.params.eps_closest, eps_cap=self.params.eps_cap,
                alpha_perturb=self.params.alpha_perturb)
            self.params.beta_max = fresh.beta_max
            self.params.degraded = fresh.degraded
            self.start_time = state.t
            self._rebeta = False
        if self._first:
            self._first = False
            perturb = break_collinearity(state, e_new, self.params)
            if perturb is not None:
                self._rebeta = True
                return perturb
        return k_capture_policy(state, e_new, self.params)

    @property
    def beta_max(self) -> float:
        return self.params.beta_max


@dataclass
class NaiveAdvancePolicy:
    """Every pursuer advances as far as it can toward the evader (d = 0)."""

    name: str = "naive_advance"

    def moves(self, state, e_new) -> list[PursuerMove]:
        P = state.pursuers
        out = [PursuerMove("dead", p.copy()) for p in P]
        alive = np.flatnonzero(state.alive)
        for i, x in zip(alive, advance_targets(P[alive], state.e, e_new, 0.0)):
            out[i] = PursuerMove("advance", x, d=0.0)
        return out


@dataclass
class StraightPursuitPolicy:
    """Unit step straight at the evader's new position."""

    name: str = "straight_pursuit"

    def moves(self, state, e_new) -> list[PursuerMove]:
        e_new = np.asarray(e_new, dtype=float)
        out = []
        for i, p in enumerate(state.pursuers):
            if not state.alive[i]:
                out.append(PursuerMove("dead", p.copy()))
                continue
            gap = e_new - p
            dist = float(np.linalg.norm(gap))
            target = e_new.copy() if dist <= 1.0 else p + gap / dist
            out.append(PursuerMove("straight", target))
        return out
