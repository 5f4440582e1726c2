"""Scenario description, validation, JSON I/O and random scenario generators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .bounded import arena_from_dict
from .errors import ScenarioValidationError, TraceFormatError

SCHEMA_VERSION = 1
POLICIES = ("k_capture", "naive_advance", "straight_pursuit", "sgall_like")
# policies that need e strictly inside the k-Hull for their guarantee
_HELLY_POLICIES = ("k_capture", "naive_advance", "straight_pursuit")


@dataclass
class Scenario:
    k: int
    pursuers: np.ndarray
    evader: np.ndarray
    evader_strategy: dict = field(default_factory=lambda: {"kind": "greedy_maximin", "samples": 256})
    policy: str = "k_capture"
    arena: dict | None = None
    seed: int = 0
    step_limit: int | None = None
    tolerances: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        self.pursuers = np.atleast_2d(np.asarray(self.pursuers, dtype=float))
        self.evader = np.asarray(self.evader, dtype=float).reshape(-1)

    @property
    def m(self) -> int:
        return int(self.evader.shape[0])

    @property
    def n(self) -> int:
        return int(self.pursuers.shape[0])

    def violations(self) -> list[str]:
        out = []
        P, e = self.pursuers, self.evader
        if P.ndim != 2 or P.shape[0] == 0:
            out.append("pursuers must be a non-empty list of points")
            return out
        if P.shape[1] != e.shape[0]:
            out.append(f"pursuers have dimension {P.shape[1]} but the evader has {e.shape[0]}")
            return out
        if self.m < 1:
            out.append("dimension must be at least 1")
        if not np.all(np.isfinite(P)) or not np.all(np.isfinite(e)):
            out.append("positions must be finite")
        if self.policy not in POLICIES:
            out.append(f"unknown policy {self.policy!r}")
        if self.policy in _HELLY_POLICIES:
            bound = geo.helly_bound(self.n, self.m)
            if not 1 <= self.k <= bound:
                out.append(
                    f"k={self.k} outside the Helly range 1 <= k <= ceil(n/(m+1)) = "
                    f"ceil({self.n}/{self.m + 1}) = {bound}"
                )
        elif self.policy == "sgall_like":
            if self.k != self.n:
                out.append(f"sgall_like uses exactly k pursuers, got k={self.k}, n={self.n}")
            if self.arena is None:
                out.append("sgall_like needs an arena")
        eps_loc = float(self.tolerances.get("eps_loc", geo.EPS_LOC))
        pts = np.vstack([P, e[None, :]])
        labels = [f"p{i}" for i in range(self.n)] + ["e"]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                dist = float(np.linalg.norm(pts[i] - pts[j]))
                if dist < eps_loc:
                    out.append(f"initial separation {labels[i]}-{labels[j]} = {dist:.3e} < {eps_loc:g}")
        if self.arena is not None:
            try:
                arena = arena_from_dict(self.arena)
            except (KeyError, ValueError, TypeError) as exc:
                out.append(f"bad arena: {exc}")
            else:
                if arena.dimension != self.m:
                    out.append(f"arena has dimension {arena.dimension}, scenario has {self.m}")
                else:
                    for lab, x in zip(labels, pts):
                        if not arena.contains(x):
                            out.append(f"{lab} starts outside the arena")
        if self.step_limit is not None and int(self.step_limit) < 1:
            out.append("step_limit must be positive")
        return out

    def validate(self) -> "Scenario":
        v = self.violations()
        if v:
            raise ScenarioValidationError(v)
        return self

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "m": self.m,
            "k": int(self.k),
            "pursuers": self.pursuers.tolist(),
            "evader": self.evader.tolist(),
            "evader_strategy": self.evader_strategy,
            "policy": self.policy,
            "arena": self.arena,
            "seed": int(self.seed),
        }
        if self.step_limit is not None:
            out["step_limit"] = int(self.step_limit)
        if self.tolerances:
            out["tolerances"] = dict(self.tolerances)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise TraceFormatError(f"unsupported schema_version {d.get('schema_version')!r}")
        missing = [key for key in ("k", "pursuers", "evader") if key not in d]
        if missing:
            raise ScenarioValidationError([f"missing field {key!r}" for key in missing])
        sc = cls(
            k=int(d["k"]),
            pursuers=d["pursuers"],
            evader=d["evader"],
            evader_strategy=d.get("evader_strategy") or {"kind": "greedy_maximin", "samples": 256},
            policy=d.get("policy", "k_capture"),
            arena=d.get("arena"),
            seed=int(d.get("seed", 0)),
            step_limit=d.get("step_limit"),
            tolerances=dict(d.get("tolerances") or {}),
            name=str(d.get("name", "")),
        )
        if "m" in d and int(d["m"]) != sc.m:
            raise ScenarioValidationError([f"m={d['m']} but positions have dimension {sc.m}"])
        return sc


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh))


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(sc.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------- generators


def random_interior_scenario(rng: np.random.Generator, n: int, k: int, m: int = 2,
                             box: float = 10.0, max_tries: int = 10000, **kw) -> Scenario:
    """Uniform pursuers in [-box, box]^m with e drawn uniformly until it is in the k-Hull interior.

    Pursuer sets whose k-Hull is too thin to hit are redrawn.
    """
    for _ in range(max_tries):
        P = rng.uniform(-box, box, size=(n, m))
        for _ in range(200):
            e = rng.uniform(P.min(axis=0), P.max(axis=0))
            if np.min(np.linalg.norm(P - e, axis=1)) <= 1e-6:
                continue
            if geo.in_khull_interior(P, e, k):
                return Scenario(k=k, pursuers=P, evader=e, **kw)
    raise RuntimeError("rejection sampling did not find an interior point")


def random_exterior_scenario(rng: np.random.Generator, n: int, k: int, m: int = 2,
                             box: float = 10.0, max_tries: int = 10000, **kw) -> Scenario:
    """e inside the convex hull of the pursuers but outside the k-Hull interior (k >= 2)."""
    if k < 2:
        raise ValueError("the 1-Hull is the convex hull; need k >= 2")
    for _ in range(max_tries):
        P = rng.uniform(-box, box, size=(n, m))
        for _ in range(200):
            e = rng.uniform(P.min(axis=0), P.max(axis=0))
            if np.min(np.linalg.norm(P - e, axis=1)) <= 1e-6:
                continue
            if geo.in_khull_interior(P, e, 1) and not geo.in_khull_interior(P, e, k):
                return Scenario(k=k, pursuers=P, evader=e, **kw)
    raise RuntimeError("rejection sampling did not find an exterior point")


def lower_bound_scenario(n: int, k: int, d_max: float = 20.0, beta: float = 1.2,
                         near: float = 2.0, **kw) -> Scenario:
    """Planar instance where the thinnest cone points along +x and its far pursuers sit on the boundary.

    The evader starts at the origin and flees along +x.  k pursuers lie on
    each of the two rays at angles +-beta, the farthest at ``d_max``; with
    fewer than k per ray the minimiser of the k-th cosine would move off +x.
    The remaining n - 2k pursuers sit behind the evader at distance ``near``,
    outside the cone, which keeps the evader inside the k-Hull.

    Raises ValueError when, for these parameters, +x is not the global
    minimiser of the k-th cosine (small beta lets another direction win).
    """
    rest = n - 2 * k
    if rest < k:
        raise ValueError("need n >= 3k")
    P = []
    for j in range(k):
        r = d_max - 0.05 * j
        for sign in (1.0, -1.0):
            P.append([r * math.cos(sign * beta), r * math.sin(sign * beta)])
    half_spread = math.pi / 12
    for j in range(rest):
        a = math.pi + (-half_spread + 2 * half_spread * j / (rest - 1) if rest > 1 else 0.0)
        P.append([near * math.cos(a), near * math.sin(a)])
    P = np.array(P)
    res = geo.kth_cosine_min(P, np.zeros(2), k)
    if abs(res.direction[0] - 1.0) > 1e-9 or abs(math.acos(min(res.g_min, 1.0)) - beta) > 1e-9:
        raise ValueError(f"beta={beta} is too small: the thinnest cone does not point along +x")
    strat = kw.pop("evader_strategy", {"kind": "fixed_direction", "direction": [1.0, 0.0]})
    return Scenario(k=k, pursuers=P, evader=np.zeros(2), evader_strategy=strat, **kw)


def random_bounded_scenario(rng: np.random.Generator, k: int, arena: dict,
                            max_tries: int = 10000, **kw) -> Scenario:
    """k pursuers and an evader drawn uniformly inside the arena, pairwise at least 1e-3 apart."""
    A = arena_from_dict(arena)
    lo, hi = A.bounding_box()
    pts = []
    for _ in range(max_tries):
        x = rng.uniform(lo, hi)
        if not A.contains(x, tol=0.0):
            continue
        if all(np.linalg.norm(x - y) > 1e-3 for y in pts):
            pts.append(x)
        if len(pts) == k + 1:
            break
    else:
        raise RuntimeError("could not place agents inside the arena")
    return Scenario(k=k, pursuers=np.array(pts[:k]), evader=pts[k], policy="sgall_like",
                    arena=arena, **kw)


def generate_batch(spec: dict) -> list[Scenario]:
    """Expand a generator spec into scenarios.

    Keys: ``count``, ``kind`` (interior | exterior | bounded), ``n`` and ``k``
    as [lo, hi] ranges, ``m``, ``box``, ``strategies`` (list of evader
    specs, crossed with every instance), ``policies``, ``arenas`` (bounded
    kind) and ``seed``.
    """
    count = int(spec.get("count", 0))
    kind = spec.get("kind", "interior")
    m = int(spec.get("m", 2))
    box = float(spec.get("box", 10.0))
    n_lo, n_hi = spec.get("n", [5, 9])
    k_lo, k_hi = spec.get("k", [2, 3])
    strategies = spec.get("strategies") or [{"kind": "greedy_maximin", "samples": 256}]
    policies = spec.get("policies") or (["sgall_like"] if kind == "bounded" else ["k_capture"])
    arenas = spec.get("arenas") or [{"kind": "ball", "center": [0.0] * m, "radius": 4.0}]
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    out: list[Scenario] = []
    for idx in range(count):
        seed = int(rng.integers(0, 2**31 - 1))
        if kind == "bounded":
            k = int(rng.integers(k_lo, k_hi + 1))
            arena = arenas[idx % len(arenas)]
            base = random_bounded_scenario(rng, k, arena, seed=seed)
        else:
            while True:
                n = int(rng.integers(n_lo, n_hi + 1))
                k = int(rng.integers(k_lo, k_hi + 1))
                if k <= geo.helly_bound(n, m):
                    break
            gen = random_interior_scenario if kind == "interior" else random_exterior_scenario
            base = gen(rng, n, k, m, box, seed=seed)
        for pol in policies:
            for strat in strategies:
                sc = Scenario(k=base.k, pursuers=base.pursuers.copy(), evader=base.evader.copy(),
                              evader_strategy=strat, policy=pol, arena=base.arena, seed=seed,
                              step_limit=spec.get("step_limit"),
                              name=f"{kind}-{idx:04d}-{pol}-{strat.get('kind')}")
                out.append(sc)
    return out
