"""Pursuit inside a compact convex arena with exactly k (or more) pursuers.

Three phases: the pursuers gather into a ball of radius 1/2, take up a
collinear formation with the evader (initializing move), and then the lead
pursuer plays the Sgall move while the others ride along the segment between
the lead and the evader.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import geometry as geo
from .errors import GeometryError, InvariantViolation, PreconditionError
from .pursuit import PursuerMove, speed_tol

GATHER_RADIUS = 0.4
FORMATION_TOL = 1e-9


class ConvexArena:
    kind: str = "convex"
    diameter: float
    dim: int

    def contains(self, x, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def ray_exit(self, x, direction) -> float:
        """Largest t >= 0 with x + t * direction inside the arena (unit direction)."""
        raise NotImplementedError

    def clip_step(self, x, target) -> np.ndarray:
        """Walk from x toward target, stopping at the boundary."""
        x = np.asarray(x, dtype=float)
        target = np.asarray(target, dtype=float)
        step = target - x
        length = float(np.linalg.norm(step))
        if length == 0.0 or self.contains(target, tol=0.0):
            return target
        t = min(length, self.ray_exit(x, step / length))
        return x + t * step / length

    @property
    def dimension(self) -> int:
        return self.dim

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class BallArena(ConvexArena):
    center: np.ndarray
    radius: float
    kind: str = "ball"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise GeometryError("ball radius must be positive")
        self.diameter = 2.0 * self.radius
        self.dim = self.center.shape[0]

    def contains(self, x, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.center)) <= self.radius + tol

    def ray_exit(self, x, direction) -> float:
        d = np.asarray(direction, dtype=float)
        y = np.asarray(x, dtype=float) - self.center
        b = float(np.dot(y, d))
        c = float(np.dot(y, y)) - self.radius ** 2
        disc = b * b - c
        if disc < 0:
            return 0.0
        return max(-b + math.sqrt(disc), 0.0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass
class PolytopeArena(ConvexArena):
    """Bounded intersection of halfspaces ``A x <= b``."""

    A: np.ndarray
    b: np.ndarray
    kind: str = "polytope"
    vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise GeometryError("A and b row counts differ")
        self.dim = self.A.shape[1]
        self.vertices = self._vertices()
        if self.vertices.shape[0] < self.dim + 1:
            raise GeometryError("polytope arena is empty or unbounded")
        self.diameter = max(float(np.linalg.norm(a - c))
                            for a, c in combinations(self.vertices, 2))

    def _vertices(self) -> np.ndarray:
        if self.dim == 2:
            big = 1e6
            poly = [np.array(v, dtype=float) for v in
                    ((-big, -big), (big, -big), (big, big), (-big, big))]
            for a, bb in zip(self.A, self.b):
                poly = geo._clip_convex(poly, a, float(bb))
            poly = geo._clean_polygon(poly)
            V = np.array(poly)
            if V.size and np.any(np.abs(V) >= big * 0.5):
                return np.zeros((0, 2))
            return V
        from scipy.optimize import linprog
        from scipy.spatial import HalfspaceIntersection

        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=np.column_stack([self.A, norms]), b_ub=self.b,
                      bounds=[(None, None)] * self.dim + [(0, None)])
        if not res.success or res.x[-1] <= 0:
            return np.zeros((0, self.dim))
        hs = HalfspaceIntersection(np.column_stack([self.A, -self.b]), res.x[:-1])
        return hs.intersections

    @classmethod
    def box(cls, lo, hi) -> "PolytopeArena":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        m = lo.shape[0]
        eye = np.eye(m)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def square(cls, diameter: float, center=(0.0, 0.0)) -> "PolytopeArena":
        half = diameter / math.sqrt(2.0) / 2.0
        c = np.asarray(center, dtype=float)
        return cls.box(c - half, c + half)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.A @ np.asarray(x, dtype=float) <= self.b + tol))

    def ray_exit(self, x, direction) -> float:
        x = np.asarray(x, dtype=float)
        d = np.asarray(direction, dtype=float)
        ad = self.A @ d
        slack = self.b - self.A @ x
        pos = ad > 1e-15
        if not np.any(pos):
            raise GeometryError("ray does not leave the polytope")
        return max(float(np.min(slack[pos] / ad[pos])), 0.0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_dict(self) -> dict:
        return {"kind": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}


def arena_from_dict(spec: dict | None) -> ConvexArena | None:
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "ball":
        return BallArena(np.asarray(spec["center"], dtype=float), float(spec["radius"]))
    if kind == "polytope":
        return PolytopeArena(spec["A"], spec["b"])
    if kind == "box":
        return PolytopeArena.box(spec["lo"], spec["hi"])
    if kind == "square":
        return PolytopeArena.square(float(spec["diameter"]), spec.get("center", (0.0, 0.0)))
    raise GeometryError(f"unknown arena kind {kind!r}")


@dataclass
class LeadFormation:
    lead: int
    followers: tuple[int, ...]
    # fraction of the lead-evader segment at which each follower sits
    fractions: tuple[float, ...]
    center: np.ndarray


def formation_error(lead_pos, follower_pos, e) -> tuple[float, bool]:
    """Largest distance of a follower from the lead-evader line, and betweenness."""
    lead_pos = np.asarray(lead_pos, dtype=float)
    e = np.asarray(e, dtype=float)
    seg = e - lead_pos
    L = float(np.linalg.norm(seg))
    if L <= geo.EPS_LOC:
        ok = all(np.linalg.norm(np.asarray(f) - e) <= FORMATION_TOL for f in follower_pos)
        return 0.0, ok
    dhat = seg / L
    worst, between = 0.0, True
    for f in follower_pos:
        rel = np.asarray(f, dtype=float) - lead_pos
        along = float(np.dot(rel, dhat))
        off = float(np.linalg.norm(rel - along * dhat))
        worst = max(worst, off)
        if not 0.0 < along < L:
            between = False
    return worst, between


def initializing_move(pursuers, center, e_new, arena: ConvexArena | None = None,
                      ball_radius: float = 0.5) -> tuple[np.ndarray, LeadFormation]:
    """Place every pursuer on the chord of the ball O through the evader's new position.

    The pursuer with the smallest projection toward the evader becomes the
    lead at the far end; the others are evenly spaced toward the evader,
    strictly before it.
    """
    P = np.atleast_2d(np.asarray(pursuers, dtype=float))
    c = np.asarray(center, dtype=float)
    e_new = np.asarray(e_new, dtype=float)
    n, m = P.shape
    if np.max(np.linalg.norm(P - c, axis=1)) > ball_radius + 1e-12:
        raise PreconditionError("pursuers must lie in the ball O before initializing")
    d = e_new - c
    tau_e = float(np.linalg.norm(d))
    if tau_e > 1e-12:
        dhat = d / tau_e
    else:
        dhat = np.zeros(m)
        dhat[0] = 1.0
    back = 0.5 * ball_radius
    if arena is not None:
        back = min(back, arena.ray_exit(c, -dhat))
    # span back + front <= ball_radius keeps consecutive spacing <= 1/(2k)
    front = min(0.5 * ball_radius, tau_e)
    if back + front <= 1e-9:
        raise PreconditionError("chord through the evader degenerates to a point")
    order = np.argsort(P @ dhat, kind="stable")
    lead = int(order[0])
    followers = tuple(int(i) for i in order[1:])
    targets = np.empty_like(P)
    targets[lead] = c - back * dhat
    span = back + front
    fractions = []
    for j, i in enumerate(followers, start=1):
        tau = -back + span * j / n
        targets[i] = c + tau * dhat
        fractions.append((tau + back) / (tau_e + back))
    form = LeadFormation(lead, followers, tuple(fractions), c)
    return targets, form


def sgall_move(p1_old, e_old, e_new, arena: ConvexArena) -> tuple[np.ndarray, np.ndarray]:
    """Lead pursuer step: the point of segment [e_new, C] nearest e_new within reach.

    C is where the ray from e_old through p1_old leaves the arena.  Returns
    (new position, C).
    """
    p1_old, e_old, e_new = (np.asarray(x, dtype=float) for x in (p1_old, e_old, e_new))
    ray = p1_old - e_old
    rn = float(np.linalg.norm(ray))
    if rn <= geo.EPS_LOC:
        raise PreconditionError("lead pursuer coincides with the evader")
    C = p1_old + arena.ray_exit(p1_old, ray / rn) * (ray / rn)
    seg = C - e_new
    L = float(np.linalg.norm(seg))
    if L <= 1e-15:
        if np.linalg.norm(C - p1_old) > 1.0 + speed_tol(C, p1_old):
            raise InvariantViolation("Sgall target out of reach")
        return C.copy(), C
    chat = seg / L
    y = e_new - p1_old
    b = float(np.dot(y, chat))
    disc = b * b - float(np.dot(y, y)) + 1.0
    if disc < -1e-12:
        raise InvariantViolation("segment [e_new, C] is out of the lead's reach")
    root = math.sqrt(max(disc, 0.0))
    s_lo, s_hi = -b - root, -b + root
    s = max(s_lo, 0.0)
    if s > min(s_hi, L) + 1e-9:
        raise InvariantViolation("segment [e_new, C] is out of the lead's reach")
    s = min(s, L)
    return e_new + s * chat, C


def follower_positions(lead_pos, e, fractions) -> np.ndarray:
    lead_pos = np.asarray(lead_pos, dtype=float)
    e = np.asarray(e, dtype=float)
    f = np.asarray(fractions, dtype=float).reshape(-1, 1)
    return lead_pos + f * (e - lead_pos)


@dataclass
class SgallLikePolicy:
    """Gather, initialize, then lead-plus-followers pursuit.

    Followers keep a fixed fraction of the lead-evader segment, so each
    follower step is a convex combination of the lead's and the evader's
    steps and never exceeds one unit.
    """

    k: int
    arena: ConvexArena
    gather_radius: float = GATHER_RADIUS
    name: str = "sgall_like"
    phase: str = "gather"
    center: np.ndarray | None = None
    formation: LeadFormation | None = None
    phase_log: list = field(default_factory=list)

    def moves(self, state, e_new) -> list[PursuerMove]:
        P = state.pursuers
        alive = state.alive
        if not np.all(alive):
            raise InvariantViolation("Sgall-like strategy lost a pursuer")
        if self.center is None:
            self.center = P.mean(axis=0)
        if self.phase == "gather":
            R = float(np.max(np.linalg.norm(P - self.center, axis=1)))
            if R > self.gather_radius + 1e-12:
                lam = max(self.gather_radius / R, 1.0 - 1.0 / R)
                targets = self.center + lam * (P - self.center)
                self.phase_log.append((state.t, "gather"))
                return [PursuerMove("gather", x) for x in targets]
            self.phase = "initialize"
        if self.phase == "initialize":
            targets, self.formation = initializing_move(P, self.center, e_new, self.arena)
            self.phase = "sgall"
            self.phase_log.append((state.t, "initialize"))
            return [PursuerMove("init", x) for x in targets]
        if self.phase_log and self.phase_log[-1][1] != "sgall":
            self.phase_log.append((state.t, "sgall"))
        return sgall_like_policy(state, e_new, self.formation, self.arena)


def sgall_like_policy(state, e_new, formation: LeadFormation, arena: ConvexArena) -> list[PursuerMove]:
    """Stateless single round of the lead/follower strategy from an existing formation."""
    P = state.pursuers
    lead_new, _ = sgall_move(P[formation.lead], state.e, e_new, arena)
    out: list[PursuerMove | None] = [None] * P.shape[0]
    out[formation.lead] = PursuerMove("sgall", lead_new)
    for i, x in zip(formation.followers,
                    follower_positions(lead_new, e_new, formation.fractions)):
        if np.linalg.norm(x - P[i]) > 1.0 + speed_tol(x, P[i]):
            raise InvariantViolation(f"follower {i} would exceed unit speed")
        out[i] = PursuerMove("follow", x)
    return out
