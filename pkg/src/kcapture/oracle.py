"""Brute-force reference computations and trace auditing.

Nothing here calls into the geometry or pursuit code: every check is
rebuilt from inputs (point sets) or from the positions stored in a trace,
so the results can be used to validate those modules.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import TraceFormatError
from .pursuit import speed_tol

DEPTH_DIRS = 100_000
BETA_RES_2D = 100_000
BETA_RES_ND = 10_000
SCAN_POINTS = 200_001


def _unit_grid(m: int, count: int, seed: int = 0) -> np.ndarray:
    if m == 2:
        phi = 2.0 * math.pi * np.arange(count) / count
        return np.column_stack([np.cos(phi), np.sin(phi)])
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((count, m))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def depth_by_sampling(S, q, num_dirs: int = DEPTH_DIRS, seed: int = 0) -> int:
    """Fewest points in a closed halfspace through q over sampled directions.

    An upper bound on the true depth: sampling can miss the worst direction
    but never invents a better one.
    """
    if num_dirs < 1000:
        raise ValueError("num_dirs must be at least 1000")
    P = np.atleast_2d(np.asarray(S, dtype=float))
    V = P - np.asarray(q, dtype=float)
    U = _unit_grid(P.shape[1], num_dirs, seed)
    best = P.shape[0]
    for chunk in np.array_split(U, max(1, num_dirs // 20000)):
        counts = np.count_nonzero(V @ chunk.T >= -1e-12, axis=0)
        best = min(best, int(counts.min()))
    return best


def _kth_max_cos(Vh: np.ndarray, U: np.ndarray, k: int) -> np.ndarray:
    C = U @ Vh.T
    return np.sort(C, axis=1)[:, -k]


def beta_by_grid(S, q, k: int, resolution: int | None = None, seed: int = 0) -> float:
    """arccos of the grid minimum of the k-th largest cosine to the points.

    In the plane the grid is uniform in angle.  In higher dimension a random
    spherical grid is followed by shrinking local grids around the best
    samples.  Returns pi/2 or more when q is not inside the k-Hull.
    """
    P = np.atleast_2d(np.asarray(S, dtype=float))
    V = P - np.asarray(q, dtype=float)
    Vh = V / np.linalg.norm(V, axis=1, keepdims=True)
    m = P.shape[1]
    if m == 2:
        res = resolution or BETA_RES_2D
        if res < 1000:
            raise ValueError("resolution must be at least 1e3 in the plane")
        best = math.inf
        for chunk in np.array_split(_unit_grid(2, res), max(1, res // 20000)):
            best = min(best, float(_kth_max_cos(Vh, chunk, k).min()))
        return math.acos(max(-1.0, min(1.0, best)))
    res = resolution or BETA_RES_ND
    if res < 10_000:
        raise ValueError("resolution must be at least 1e4 above the plane")
    rng = np.random.default_rng(seed)
    U = _unit_grid(m, res, seed)
    g = _kth_max_cos(Vh, U, k)
    seeds = U[np.argsort(g)[:10]]
    best = float(g.min())
    for u0 in seeds:
        u, radius = u0, 0.1
        for _ in range(40):
            cand = u + radius * rng.standard_normal((400, m))
            cand = np.vstack([u, cand / np.linalg.norm(cand, axis=1, keepdims=True)])
            gc = _kth_max_cos(Vh, cand, k)
            i = int(np.argmin(gc))
            u = cand[i]
            best = min(best, float(gc[i]))
            radius *= 0.7
    return math.acos(max(-1.0, min(1.0, best)))


def khull_mask_by_sampling(S, k: int, xs, ys, num_dirs: int = 1440) -> np.ndarray:
    """Boolean grid (len(ys), len(xs)): depth of (x, y) is at least k, by direction sampling.

    A point has depth >= k iff for every direction u its projection is at
    most the k-th largest projection of the points.
    """
    P = np.atleast_2d(np.asarray(S, dtype=float))
    U = _unit_grid(2, num_dirs)
    thr = np.sort(P @ U.T, axis=0)[-k, :] + 1e-12
    X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    G = np.column_stack([X.ravel(), Y.ravel()])
    inside = np.ones(G.shape[0], dtype=bool)
    for chunk in np.array_split(np.arange(num_dirs), max(1, num_dirs // 90)):
        inside &= np.all(G @ U[chunk].T <= thr[chunk], axis=1)
    return inside.reshape(X.shape)


def _near_feasible(X: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    # a tangent feasible set is a single point the grid can miss; accept the
    # least-infeasible samples instead
    excess = np.maximum(np.linalg.norm(X - center, axis=1) - radius, 0.0)
    return excess <= excess.min() + 1e-9


def scan_segment_nearest(a, b, center, radius: float = 1.0,
                         num: int = SCAN_POINTS) -> np.ndarray:
    """Point of segment [a, b] closest to a within ``radius`` of ``center``, by dense scan."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.linspace(0.0, 1.0, num)
    X = a + t[:, None] * (b - a)
    ok = _near_feasible(X, np.asarray(center, dtype=float), radius)
    return X[int(np.argmax(ok))]


def scan_advance(p, e_old, e_new, d: float, num: int = SCAN_POINTS) -> np.ndarray:
    """Advance-move target by scanning the ray from e_new parallel to p - e_old."""
    p, e_old, e_new = (np.asarray(x, dtype=float) for x in (p, e_old, e_new))
    v = p - e_old
    v = v / np.linalg.norm(v)
    reach = np.linalg.norm(p - e_new) + 1.0
    s = np.linspace(0.0, reach, num)
    X = e_new + s[:, None] * v
    cost = np.where(_near_feasible(X, p, 1.0), np.abs(s - d), np.inf)
    return X[int(np.argmin(cost))]


# ---------------------------------------------------------------- trace audit


@dataclass
class BoundAudit:
    gather_time: int | None = None
    gather_bound: float | None = None
    cone_moves: int = 0
    cone_min_margin: float | None = None
    drop_windows: list = field(default_factory=list)
    window_bound: float | None = None
    longest_window: int | None = None
    k_closest_kept: bool | None = None
    capture_time: int | None = None
    capture_bound: float | None = None
    lowerbound_value: float | None = None
    max_orientation_drift: float | None = None
    max_speed: float = 0.0
    min_separation: float = math.inf
    destroyed_events: int = 0
    khull_invariant: bool | None = None
    formation_max_offline: float | None = None
    formation_between: bool | None = None
    bounded_cap: float | None = None
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drop_windows"] = [[int(a), float(b)] for a, b in self.drop_windows]
        if not math.isfinite(d["min_separation"]):
            d["min_separation"] = None
        d["ok"] = self.ok
        return d


def _trace_dict(trace) -> dict:
    d = trace.to_dict() if hasattr(trace, "to_dict") else trace
    if not isinstance(d, dict) or "steps" not in d or "header" not in d:
        raise TraceFormatError("not a trace")
    if not d["steps"]:
        raise TraceFormatError("trace has no steps")
    return d


def _angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Angle between matching rows of A and B, accurate near zero in any dimension."""
    Ah = A / np.linalg.norm(A, axis=-1, keepdims=True)
    Bh = B / np.linalg.norm(B, axis=-1, keepdims=True)
    return 2.0 * np.arctan2(np.linalg.norm(Ah - Bh, axis=-1), np.linalg.norm(Ah + Bh, axis=-1))


def audit_trace(trace, params: dict | None = None) -> BoundAudit:
    """Check a finished trace against the capture-time bounds and the game rules.

    ``params`` may override header entries (k, n, cos_beta, d_max, eps_closest,
    eps_cap, eps_loc, start_time).
    """
    d = _trace_dict(trace)
    h = dict(d["header"])
    if params:
        h.update(params)
    steps = d["steps"]
    try:
        E = np.array([s["e"] for s in steps], dtype=float)
        P = np.array([s["p"] for s in steps], dtype=float)
        alive = np.array([s.get("alive", [True] * P.shape[1]) for s in steps], dtype=bool)
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"malformed positions: {exc}") from exc
    if P.ndim != 3 or E.shape[0] != P.shape[0] or E.shape[1] != P.shape[2]:
        raise TraceFormatError("inconsistent position arrays")
    T = len(steps) - 1
    n = P.shape[1]
    k = int(h["k"])
    eps_closest = float(h.get("eps_closest", 1e-7))
    eps_cap = float(h.get("eps_cap", 1e-9))
    eps_loc = float(h.get("eps_loc", 1e-9))
    outcome = d.get("outcome") or {}
    captured = outcome.get("kind") == "k_captured"
    a = BoundAudit()

    # speed legality
    if T > 0:
        sp_e = np.linalg.norm(np.diff(E, axis=0), axis=1)
        sp_p = np.linalg.norm(np.diff(P, axis=0), axis=2)
        a.max_speed = float(max(sp_e.max(), sp_p.max()))
        if a.max_speed > 1.0 + speed_tol(E, P):
            a.violations.append(f"speed {a.max_speed:.15g} exceeds 1")

    # separation at every non-capture instant
    last = T if not captured else T - 1
    for t in range(last + 1):
        pts = np.vstack([P[t][alive[t]], E[t][None, :]])
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dist, np.inf)
        a.min_separation = min(a.min_separation, float(dist.min()))
    if a.min_separation <= eps_loc:
        a.violations.append(f"agents within {a.min_separation:.3e} at a non-capture instant")

    a.destroyed_events = sum(1 for s in steps if s.get("destroyed"))
    flags = [s.get("in_khull") for s in steps]
    if any(f is not None for f in flags):
        a.khull_invariant = all(f is not False for f in flags)

    R = np.linalg.norm(P - E[:, None, :], axis=2)
    R_alive = np.where(alive, R, np.inf)
    dmin = R_alive.min(axis=1)

    if h.get("policy") == "sgall_like":
        _audit_bounded(a, h, E, P, T, captured)
        return a

    cos_beta = h.get("cos_beta")
    start = int(h.get("start_time", 0))
    if h.get("start"):
        cos_beta = h["start"].get("cos_beta", cos_beta)
        d_max = float(h["start"]["d_max"])
    else:
        d_max = float(h["d_max"]) if h.get("d_max") is not None else None
    if cos_beta is None or d_max is None:
        # evader started outside the k-Hull: no capture bounds apply
        return a
    cos_beta = float(cos_beta)
    # the lower bound is a statement about the initial configuration
    h0 = d["header"]
    if h0.get("cos_beta") is not None:
        a.lowerbound_value = float(h0["d_max"]) / float(h0["cos_beta"])

    # first time k pursuers share the minimum distance
    n_closest = np.sum(R_alive <= dmin[:, None] + eps_closest, axis=1)
    a.gather_bound = n * (1.0 + d_max / cos_beta)
    hits = np.flatnonzero(n_closest[start:] >= k)
    if hits.size:
        a.gather_time = int(hits[0])
        if a.gather_time > a.gather_bound:
            a.violations.append(f"k closest after {a.gather_time} > {a.gather_bound:.3f}")
    elif captured:
        a.violations.append("captured without k pursuers ever being closest")

    # each Cone move shrinks the group distance by cos beta (or lands)
    margins = []
    for t in range(1, T + 1):
        group = None
        for mv in steps[t].get("moves", []):
            if mv.get("kind") == "cone":
                group = mv.get("group")
                break
        if group is None:
            continue
        before = float(R[t - 1, group].max())
        after = float(R[t, group].max())
        allowed = max(0.0, before - cos_beta)
        margins.append(allowed - after)
    a.cone_moves = len(margins)
    if margins:
        a.cone_min_margin = float(min(margins))
        if a.cone_min_margin < -1e-9:
            a.violations.append(f"cone move fell short by {-a.cone_min_margin:.3e}")

    # k stay closest, and d_min drops by cos beta within every window
    a.window_bound = n * (1.0 + d_max / cos_beta)
    if a.gather_time is not None:
        t3 = start + a.gather_time
        a.k_closest_kept = bool(np.all(n_closest[t3:] >= k))
        if not a.k_closest_kept:
            a.violations.append("fewer than k closest pursuers after they first gathered")
        longest = 0
        for s in range(t3, T):
            thr = dmin[s] - cos_beta + 1e-9
            later = np.flatnonzero((dmin[s + 1:] <= thr) | (dmin[s + 1:] <= eps_cap))
            # an unfinished window at the step limit counts with its length so far
            span = int(later[0]) + 1 if later.size else T - s
            longest = max(longest, span)
        a.longest_window = longest
        if longest > a.window_bound:
            a.violations.append(f"d_min stalled for {longest} > {a.window_bound:.3f} moves")
        # successive drops of at least cos beta, for the report
        s, level = t3, dmin[t3]
        for t in range(t3 + 1, T + 1):
            if dmin[t] <= level - cos_beta + 1e-9 or (t == T and captured):
                a.drop_windows.append((t - s, float(level - dmin[t])))
                s, level = t, dmin[t]

    # overall capture time
    a.capture_bound = start + n * (1.0 + d_max / cos_beta) ** 2
    if captured:
        a.capture_time = int(outcome["time"])
        if a.capture_time > a.capture_bound:
            a.violations.append(f"capture at {a.capture_time} > bound {a.capture_bound:.3f}")
    elif h.get("policy") == "k_capture" and outcome.get("kind") == "step_limit":
        a.violations.append("step limit reached with the evader inside the k-Hull")

    # orientation: offsets keep their direction after the set-up rounds
    drift = 0.0
    # the perturbation round (if any) ends at start_time and is excluded
    for t in range(start + 1, T + 1):
        ok = alive[t] & alive[t - 1] & (R[t] > eps_cap) & (R[t - 1] > eps_cap)
        if ok.any():
            ang = _angles(P[t - 1][ok] - E[t - 1], P[t][ok] - E[t])
            drift = max(drift, float(ang.max()))
    a.max_orientation_drift = drift
    if h.get("policy") == "k_capture" and drift >= 1e-9:
        a.violations.append(f"orientation drift {drift:.3e} rad")

    if h.get("policy") == "k_capture" and a.khull_invariant is False:
        a.violations.append("evader left the k-Hull interior")
    return a


def _audit_bounded(a: BoundAudit, h: dict, E, P, T: int, captured: bool) -> None:
    a.bounded_cap = h.get("bounded_cap")
    if captured and a.bounded_cap is not None:
        a.capture_time = T
        if T > a.bounded_cap:
            a.violations.append(f"bounded capture at {T} > {a.bounded_cap:.1f}")
    form = h.get("formation")
    init_t = None
    for t, ph in h.get("phase_log", []):
        if ph == "initialize":
            init_t = int(t) + 1
    if form is None or init_t is None:
        return
    lead, followers = form["lead"], form["followers"]
    worst, between = 0.0, True
    for t in range(init_t, T + 1):
        seg = E[t] - P[t, lead]
        L = float(np.linalg.norm(seg))
        if L <= 1e-12:
            continue
        dhat = seg / L
        for f in followers:
            rel = P[t, f] - P[t, lead]
            along = float(rel @ dhat)
            worst = max(worst, float(np.linalg.norm(rel - along * dhat)))
            if not 0.0 < along < L:
                between = False
    a.formation_max_offline = worst
    a.formation_between = between
    if worst > 1e-9:
        a.violations.append(f"follower {worst:.3e} off the lead-evader line")
    if not between:
        a.violations.append("follower not strictly between lead and evader")
