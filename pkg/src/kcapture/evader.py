"""Evader strategies.

``SeparatingEscape`` is the escape that works whenever the evader is outside
the pursuers' k-Hull.  The others are used to stress the pursuit policies.
All strategies return the evader's next position and never step more than
one unit; in a bounded arena steps stop at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import PreconditionError


def _alive_points(state) -> np.ndarray:
    return state.pursuers[state.alive]


def _finish(state, target: np.ndarray) -> np.ndarray:
    if state.arena is not None:
        return state.arena.clip_step(state.e, target)
    return target


@dataclass(frozen=True)
class EscapeWitness:
    direction: np.ndarray
    small_side: tuple[int, ...]
    far_side: tuple[int, ...]


def escape_witness(pursuers, e, k: int) -> EscapeWitness:
    """Hyperplane through e with fewer than k pursuers strictly on one side.

    Raises PreconditionError when e is inside the k-Hull interior.
    """
    P = geo.as_points(pursuers)
    e = np.asarray(e, dtype=float)
    count, u = geo.min_strict_count(P, e)
    if count >= k:
        raise PreconditionError("evader is inside the k-Hull interior; no escape hyperplane")
    dots = (P - e) @ u
    small = tuple(int(i) for i in np.flatnonzero(dots > geo.EPS_GEOM))
    far = tuple(int(i) for i in np.flatnonzero(dots <= geo.EPS_GEOM))
    return EscapeWitness(u, small, far)


def separating_escape(pursuers, e, k: int) -> np.ndarray:
    """Unit step along the normal of the witness hyperplane, toward its small side."""
    w = escape_witness(pursuers, e, k)
    return np.asarray(e, dtype=float) + w.direction


def _unit_directions(m: int, samples: int) -> np.ndarray:
    if m == 2:
        phis = 2.0 * math.pi * np.arange(samples) / samples
        return np.column_stack([np.cos(phis), np.sin(phis)])
    return geo._sphere_directions(m, samples)


def greedy_maximin(pursuers, e, samples: int = 256, arena=None) -> np.ndarray:
    """Of the zero step and ``samples`` unit steps, the one farthest from the nearest pursuer.

    Ties go to the earliest candidate (the zero step comes first).
    """
    if samples < 8:
        raise PreconditionError("greedy_maximin needs at least 8 samples")
    P = np.atleast_2d(np.asarray(pursuers, dtype=float))
    e = np.asarray(e, dtype=float)
    cands = np.vstack([e[None, :], e + _unit_directions(e.shape[0], samples)])
    if arena is not None:
        cands = np.array([arena.clip_step(e, c) for c in cands])
    diff = cands[:, None, :] - P[None, :, :]
    score = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).min(axis=1)
    return cands[int(np.argmax(score))]


class EvaderStrategy:
    name = "evader"

    def step(self, state) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.name}


@dataclass
class FixedDirection(EvaderStrategy):
    direction: np.ndarray
    name: str = "fixed_direction"

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        self.direction = d / np.linalg.norm(d)

    def step(self, state) -> np.ndarray:
        return _finish(state, state.e + self.direction)

    def to_dict(self) -> dict:
        return {"kind": self.name, "direction": self.direction.tolist()}


@dataclass
class GreedyMaximin(EvaderStrategy):
    samples: int = 256
    name: str = "greedy_maximin"

    def step(self, state) -> np.ndarray:
        return greedy_maximin(_alive_points(state), state.e, self.samples, state.arena)

    def to_dict(self) -> dict:
        return {"kind": self.name, "samples": self.samples}


@dataclass
class RandomUnit(EvaderStrategy):
    seed: int = 0
    name: str = "random_unit"
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def step(self, state) -> np.ndarray:
        g = self._rng.standard_normal(state.e.shape[0])
        return _finish(state, state.e + g / np.linalg.norm(g))

    def to_dict(self) -> dict:
        return {"kind": self.name, "seed": self.seed}


@dataclass
class Scripted(EvaderStrategy):
    steps: list
    name: str = "scripted"
    _i: int = field(default=0, init=False, repr=False)

    def step(self, state) -> np.ndarray:
        if self._i >= len(self.steps):
            return state.e.copy()
        s = np.asarray(self.steps[self._i], dtype=float)
        self._i += 1
        return _finish(state, state.e + s)

    def to_dict(self) -> dict:
        return {"kind": self.name, "steps": [list(map(float, s)) for s in self.steps]}


@dataclass
class SeparatingEscape(EvaderStrategy):
    """Escape across a hyperplane that has fewer than k pursuers on its far side.

    The witness direction is kept while it still certifies an escape (fewer
    than k pursuers strictly ahead) and recomputed only when it stops doing
    so.  If the evader is inside the k-Hull interior the fallback strategy is
    played instead, or PreconditionError is raised when there is none.
    """

    k: int
    fallback: EvaderStrategy | None = None
    name: str = "separating_escape"
    witness: EscapeWitness | None = None
    history: list = field(default_factory=list)

    def _still_valid(self, P: np.ndarray, e: np.ndarray) -> bool:
        if self.witness is None:
            return False
        ahead = int(np.count_nonzero((P - e) @ self.witness.direction > geo.EPS_GEOM))
        return ahead < self.k

    def step(self, state) -> np.ndarray:
        P = _alive_points(state)
        e = state.e
        if not self._still_valid(P, e):
            try:
                w = escape_witness(P, e, self.k)
            except PreconditionError:
                if self.fallback is None:
                    raise
                self.history.append(None)
                return self.fallback.step(state)
            alive_idx = np.flatnonzero(state.alive)
            self.witness = EscapeWitness(
                w.direction,
                tuple(int(alive_idx[i]) for i in w.small_side),
                tuple(int(alive_idx[i]) for i in w.far_side),
            )
        self.history.append(self.witness.direction.copy())
        return _finish(state, e + self.witness.direction)

    def to_dict(self) -> dict:
        out = {"kind": self.name}
        if self.fallback is not None:
            out["fallback"] = self.fallback.to_dict()
        return out


def strategy_from_dict(spec: dict, k: int, seed: int = 0) -> EvaderStrategy:
    kind = spec.get("kind")
    if kind == "fixed_direction":
        return FixedDirection(np.asarray(spec["direction"], dtype=float))
    if kind == "greedy_maximin":
        return GreedyMaximin(int(spec.get("samples", 256)))
    if kind == "random_unit":
        return RandomUnit(int(spec.get("seed", seed)))
    if kind == "scripted":
        return Scripted(list(spec["steps"]))
    if kind == "separating_escape":
        fb = spec.get("fallback")
        return SeparatingEscape(k, strategy_from_dict(fb, k, seed) if fb else None)
    raise ValueError(f"unknown evader strategy {kind!r}")


EVADER_KINDS = ("fixed_direction", "greedy_maximin", "random_unit", "scripted", "separating_escape")
