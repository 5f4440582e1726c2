"""Alternating-move game loop, outcome detection and trace recording.

A round is: the evader steps, then every alive pursuer steps at once,
knowing both the old and new evader positions.  Capture and contact are
judged only after the pursuers' move.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .bounded import SgallLikePolicy, arena_from_dict
from .errors import CoLocationError, IllegalMoveError, NotInteriorError, TraceFormatError
from .evader import SeparatingEscape, strategy_from_dict
from .pursuit import (EPS_CAP, EPS_CLOSEST, KCapturePolicy, NaiveAdvancePolicy, PursuitParams,
                      StraightPursuitPolicy, compute_closest_set, speed_tol)
from .scenario import SCHEMA_VERSION, Scenario

log = logging.getLogger(__name__)

STEP_LIMIT_FACTOR = 10
BOUNDED_CAP_CONSTANT = 16


@dataclass
class GameState:
    t: int
    e: np.ndarray
    pursuers: np.ndarray
    alive: np.ndarray
    phase: str = "evader"
    arena: object | None = None

    def copy(self) -> "GameState":
        return GameState(self.t, self.e.copy(), self.pursuers.copy(), self.alive.copy(),
                         self.phase, self.arena)


@dataclass
class Outcome:
    kind: str  # k_captured | pursuers_destroyed | step_limit | escaped
    time: int
    indices: tuple[int, ...] = ()
    certificate: dict | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "time": int(self.time), "indices": [int(i) for i in self.indices]}
        if self.certificate is not None:
            out["certificate"] = self.certificate
        return out


@dataclass
class MoveRecord:
    t: int
    e: np.ndarray
    pursuers: np.ndarray
    alive: np.ndarray
    moves: list
    d_min: float
    closest: tuple[int, ...]
    axis: np.ndarray | None
    captured: tuple[int, ...] = ()
    destroyed: tuple[int, ...] = ()
    in_khull: bool | None = None

    def to_dict(self) -> dict:
        return {
            "t": int(self.t),
            "e": [float(x) for x in self.e],
            "p": [[float(x) for x in row] for row in self.pursuers],
            "alive": [bool(a) for a in self.alive],
            "moves": [m.to_dict() for m in self.moves],
            "d_min": float(self.d_min),
            "closest": [int(i) for i in self.closest],
            "axis": None if self.axis is None else [float(x) for x in self.axis],
            "captured": [int(i) for i in self.captured],
            "destroyed": [int(i) for i in self.destroyed],
            "in_khull": self.in_khull,
        }


@dataclass
class Trace:
    header: dict
    steps: list = field(default_factory=list)
    outcome: dict | None = None
    audit: dict | None = None

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "header": self.header, "steps": self.steps,
                "outcome": self.outcome, "audit": self.audit}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), allow_nan=False)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "Trace":
        if not isinstance(d, dict) or d.get("schema_version") != SCHEMA_VERSION:
            raise TraceFormatError("trace must be an object with schema_version 1")
        for key in ("header", "steps"):
            if key not in d:
                raise TraceFormatError(f"trace is missing {key!r}")
        if not isinstance(d["steps"], list) or not d["steps"]:
            raise TraceFormatError("trace has no steps")
        for i, s in enumerate(d["steps"]):
            if not isinstance(s, dict) or not {"t", "e", "p", "d_min"} <= s.keys():
                raise TraceFormatError(f"step {i} is malformed")
        return cls(d["header"], d["steps"], d.get("outcome"), d.get("audit"))

    @classmethod
    def load(cls, path) -> "Trace":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Evader positions (T+1, m) and pursuer positions (T+1, n, m)."""
        E = np.array([s["e"] for s in self.steps], dtype=float)
        P = np.array([s["p"] for s in self.steps], dtype=float)
        return E, P


def capture_time_bound(n: int, d_max: float, cos_beta: float) -> float:
    return n * (1.0 + d_max / cos_beta) ** 2


def gather_bound(n: int, d_max: float, cos_beta: float) -> float:
    return n * (1.0 + d_max / cos_beta)


def _d_max(P: np.ndarray, e: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(P - e, axis=1)))


def _check_separation(e: np.ndarray, P: np.ndarray, alive: np.ndarray, eps: float) -> None:
    idx = np.flatnonzero(alive)
    pts = np.vstack([P[idx], e[None, :]])
    labels = [f"p{i}" for i in idx] + ["e"]
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    if dist.min() <= eps:
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        i, j = sorted((int(i), int(j)))
        raise CoLocationError(f"agents {labels[i]} and {labels[j]} are {dist[i, j]:.3e} apart",
                              pair=(labels[i], labels[j]))


def step(state: GameState, evader, policy, k: int, eps_cap: float = EPS_CAP,
         eps_closest: float = EPS_CLOSEST, eps_loc: float = geo.EPS_LOC,
         record_khull: bool = True) -> tuple[GameState, MoveRecord]:
    """Play one round.  Returns the new state and what happened."""
    if state.phase != "evader":
        raise IllegalMoveError(f"expected the evader to move, phase is {state.phase!r}")
    arena = state.arena
    e_new = np.asarray(evader.step(state), dtype=float)
    w = e_new - state.e
    if float(np.linalg.norm(w)) > 1.0 + speed_tol(state.e, e_new):
        raise IllegalMoveError(f"evader step {np.linalg.norm(w):.15g} exceeds 1", agent="evader")
    if arena is not None and not arena.contains(e_new):
        raise IllegalMoveError("evader left the arena", agent="evader")

    mid = state.copy()
    mid.phase = "pursuers"
    moves = policy.moves(mid, e_new)
    P_new = state.pursuers.copy()
    live = np.flatnonzero(state.alive)
    P_new[live] = np.array([moves[i].target for i in live], dtype=float).reshape(len(live), -1)
    steps = np.linalg.norm(P_new - state.pursuers, axis=1)
    tol = speed_tol(state.pursuers[live], P_new[live])
    for i in live:
        if steps[i] > 1.0 + tol:
            raise IllegalMoveError(
                f"pursuer {i} ({moves[i].kind}) step {steps[i]:.15g} exceeds 1", agent=f"p{i}")
        if arena is not None and not arena.contains(P_new[i]):
            raise IllegalMoveError(f"pursuer {i} left the arena", agent=f"p{i}")

    alive = state.alive.copy()
    dist = np.linalg.norm(P_new - e_new, axis=1)
    touching = np.flatnonzero(alive & (dist <= eps_cap))
    captured: tuple[int, ...] = ()
    destroyed: tuple[int, ...] = ()
    if touching.size >= k:
        captured = tuple(int(i) for i in touching)
    elif touching.size > 0:
        destroyed = tuple(int(i) for i in touching)
        alive[touching] = False
        log.warning("t=%d: %d pursuer(s) reached the evader alone and were destroyed; "
                    "a correct policy never allows this", state.t + 1, touching.size)

    new = GameState(state.t + 1, e_new, P_new, alive, "evader", arena)
    if not captured:
        _check_separation(e_new, P_new, alive, eps_loc)

    in_khull = None
    if alive.any():
        closest = compute_closest_set(P_new, e_new, eps_closest, indices=np.flatnonzero(alive))
        d_min, closest_idx = closest.d_min, closest.indices
        if record_khull and not captured and int(alive.sum()) >= k:
            in_khull = bool(geo.min_strict_count(P_new[alive], e_new)[0] >= k)
    else:
        d_min, closest_idx = math.inf, ()
    u = float(np.linalg.norm(w))
    axis = w / u if u > 0 else None
    rec = MoveRecord(new.t, e_new, P_new, alive, moves, d_min, closest_idx, axis,
                     captured, destroyed, in_khull)
    return new, rec


def build_policy(sc: Scenario, P: np.ndarray, e: np.ndarray, arena, eps_cap: float,
                 eps_closest: float):
    if sc.policy == "k_capture":
        params = PursuitParams.from_positions(P, e, sc.k, eps_closest=eps_closest, eps_cap=eps_cap)
        return KCapturePolicy(params)
    if sc.policy == "naive_advance":
        return NaiveAdvancePolicy()
    if sc.policy == "straight_pursuit":
        return StraightPursuitPolicy()
    if sc.policy == "sgall_like":
        return SgallLikePolicy(sc.k, arena)
    raise ValueError(f"unknown policy {sc.policy!r}")


def _bound_params(P: np.ndarray, e: np.ndarray, k: int) -> dict:
    """beta_max, d_max and the capture-time bound at the given configuration.

    When e is not inside the k-Hull the bound of the 1-Hull (if e is inside
    the convex hull) stands in, so runs where the evader should escape still
    get a horizon of the same scale.
    """
    n = P.shape[0]
    d_max = _d_max(P, e)
    out = {"d_max": d_max, "beta_max": None, "cos_beta": None, "surrogate_k": None,
           "capture_bound": None, "gather_bound": None}
    for kk in (k, 1):
        try:
            res = geo.beta_max(P, e, kk)
        except NotInteriorError:
            continue
        cb = math.cos(res.beta_max)
        if kk == k:
            out.update(beta_max=res.beta_max, cos_beta=cb)
        else:
            out["surrogate_k"] = 1
        out["capture_bound"] = capture_time_bound(n, d_max, cb)
        out["gather_bound"] = gather_bound(n, d_max, cb)
        break
    return out


def default_step_limit(sc: Scenario, arena=None) -> int:
    if sc.policy == "sgall_like":
        return STEP_LIMIT_FACTOR * BOUNDED_CAP_CONSTANT * int(math.ceil(arena.diameter ** 2))
    b = _bound_params(sc.pursuers, sc.evader, sc.k)["capture_bound"]
    if b is None:
        # e outside the convex hull: scale by distance alone
        b = sc.n * (1.0 + _d_max(sc.pursuers, sc.evader)) ** 2
    return int(math.ceil(STEP_LIMIT_FACTOR * b))


def _escape_certificate(trace_steps: list, evader) -> dict:
    """Per-round outside-the-k-Hull flags plus the far-group projection log."""
    flags = [s["in_khull"] for s in trace_steps]
    cert: dict = {
        "rounds": len(flags),
        "rounds_outside": int(sum(1 for f in flags if f is False)),
        "all_rounds_outside": all(f is False for f in flags),
    }
    if isinstance(evader, SeparatingEscape) and evader.witness is not None:
        u = evader.witness.direction
        far = list(evader.witness.far_side)
        E = np.array([s["e"] for s in trace_steps], dtype=float)
        P = np.array([s["p"] for s in trace_steps], dtype=float)
        # rounds since the witness was last (re)computed
        dirs = evader.history
        start = 0
        for i in range(len(dirs) - 1, -1, -1):
            if dirs[i] is None or not np.array_equal(dirs[i], u):
                start = i + 1
                break
        if far:
            gaps = np.einsum("tm,m->t", E[start:], u)[:, None] - P[start:, far, :] @ u
            inc = np.diff(gaps, axis=0)
            cert["far_min_increment"] = float(inc.min()) if inc.size else 0.0
            cert["far_gap_monotone"] = bool(inc.size == 0 or inc.min() >= -1e-9)
        cert["direction"] = [float(x) for x in u]
        cert["far_group"] = far
        cert["witness_since"] = int(start)
        cert["witness_changes"] = int(sum(
            1 for a, b in zip(dirs, dirs[1:])
            if a is None or b is None or not np.array_equal(a, b)))
    return cert


def run(sc: Scenario, step_limit: int | None = None, record_khull: bool = True,
        eps_cap: float | None = None, eps_closest: float | None = None) -> tuple[Outcome, Trace]:
    """Validate the scenario and play it to capture, destruction or the step limit."""
    sc.validate()
    tol = sc.tolerances
    eps_cap = float(eps_cap if eps_cap is not None else tol.get("eps_cap", EPS_CAP))
    eps_closest = float(eps_closest if eps_closest is not None
                        else tol.get("eps_closest", EPS_CLOSEST))
    eps_loc = float(tol.get("eps_loc", geo.EPS_LOC))
    arena = arena_from_dict(sc.arena)
    P0 = sc.pursuers.copy()
    e0 = sc.evader.copy()
    n, k = sc.n, sc.k
    if step_limit is None:
        step_limit = sc.step_limit if sc.step_limit is not None else default_step_limit(sc, arena)
    evader = strategy_from_dict(sc.evader_strategy, k, seed=sc.seed)
    policy = build_policy(sc, P0, e0, arena, eps_cap, eps_closest)

    header = {
        "name": sc.name,
        "m": sc.m, "n": n, "k": k,
        "policy": sc.policy,
        "evader_strategy": evader.to_dict(),
        "seed": int(sc.seed),
        "arena": None if arena is None else arena.to_dict(),
        "step_limit": int(step_limit),
        "eps_cap": eps_cap, "eps_closest": eps_closest, "eps_loc": eps_loc,
    }
    if sc.policy != "sgall_like":
        header.update(_bound_params(P0, e0, k))
    else:
        header["diameter"] = float(arena.diameter)
        header["bounded_cap"] = BOUNDED_CAP_CONSTANT * float(arena.diameter) ** 2

    state = GameState(0, e0, P0, np.ones(n, dtype=bool), "evader", arena)
    _check_separation(e0, P0, state.alive, eps_loc)
    init = compute_closest_set(P0, e0, eps_closest)
    khull0 = None
    if record_khull and sc.policy != "sgall_like":
        khull0 = bool(geo.min_strict_count(P0, e0)[0] >= k)
    steps = [MoveRecord(0, e0, P0, state.alive.copy(), [], init.d_min, init.indices, None,
                        in_khull=khull0).to_dict()]
    outcome = None
    while state.t < step_limit:
        state, rec = step(state, evader, policy, k, eps_cap, eps_closest, eps_loc,
                          record_khull and sc.policy != "sgall_like")
        steps.append(rec.to_dict())
        if rec.captured:
            outcome = Outcome("k_captured", state.t, rec.captured)
            break
        if int(state.alive.sum()) < k:
            outcome = Outcome("pursuers_destroyed", state.t,
                              tuple(int(i) for i in np.flatnonzero(~state.alive)))
            break
    if outcome is None:
        cert = None
        kind = "step_limit"
        if isinstance(evader, SeparatingEscape) and sc.policy != "sgall_like":
            cert = _escape_certificate(steps, evader)
            if cert["all_rounds_outside"]:
                kind = "escaped"
        outcome = Outcome(kind, state.t, (), cert)

    if isinstance(policy, KCapturePolicy):
        header["start_time"] = int(policy.start_time)
        if policy.start_time > 0:
            s0 = steps[policy.start_time]
            Ps = np.array(s0["p"])
            es = np.array(s0["e"])
            bp = _bound_params(Ps, es, k)
            header["start"] = bp
        header["degraded"] = bool(policy.params.degraded)
        header["policy_beta_max"] = float(policy.params.beta_max)
    elif isinstance(policy, SgallLikePolicy):
        header["phase_log"] = [[int(t), ph] for t, ph in policy.phase_log]
        if policy.formation is not None:
            header["formation"] = {"lead": int(policy.formation.lead),
                                   "followers": [int(i) for i in policy.formation.followers],
                                   "fractions": [float(f) for f in policy.formation.fractions]}
    trace = Trace(header, steps, outcome.to_dict())
    return outcome, trace
