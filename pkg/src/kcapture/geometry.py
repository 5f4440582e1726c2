"""Geometric primitives for the k-capture game.

Halfspace (Tukey) depth, strict k-Hull membership, the k-Hull polygon in the
plane, the worst-case cone half angle ``beta_max`` and cone membership.

Points are plain ``numpy`` arrays: a point set is an ``(n, m)`` array, a
vector is an ``(m,)`` array.  Everything here is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    CoincidentPointError,
    DegenerateHullError,
    DimensionMismatchError,
    GeometryError,
    HellyBoundError,
    NotInteriorError,
)

EPS_GEOM = 1e-9
EPS_ANG = 1e-9
EPS_LOC = 1e-9

# exact combinatorial depth in m >= 3 is only attempted up to this many points
MAX_EXACT_N_HIGHDIM = 15
MAX_POLYGON_N = 30

TWO_PI = 2.0 * math.pi


def as_points(S) -> np.ndarray:
    P = np.asarray(S, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise GeometryError("point set must be a nonempty (n, m) array")
    if P.shape[1] < 2:
        raise GeometryError("dimension m must be at least 2")
    if not np.all(np.isfinite(P)):
        raise GeometryError("point coordinates must be finite")
    return P


def as_vector(x, m: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if m is not None and v.shape[0] != m:
        raise DimensionMismatchError(f"expected a {m}-vector, got dimension {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise GeometryError("vector coordinates must be finite")
    return v


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def helly_bound(n: int, m: int) -> int:
    """Largest k for which the k-Hull of n points in R^m is guaranteed nonempty."""
    return -(-n // (m + 1))


def check_helly(k: int, n: int, m: int) -> None:
    if not 1 <= k <= helly_bound(n, m):
        raise HellyBoundError(k, n, m)


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    c = float(np.dot(a, b) / (na * nb))
    # atan2 form keeps precision for nearly parallel vectors
    if a.shape[0] == 2:
        cross = a[0] * b[1] - a[1] * b[0]
        return abs(math.atan2(cross, float(np.dot(a, b))))
    s = np.linalg.norm(np.outer(a, b) - np.outer(b, a)) / math.sqrt(2.0) / (na * nb)
    return math.atan2(s, c)


@dataclass(frozen=True)
class Hyperplane:
    """The set ``{x : normal . x = offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        nrm = np.linalg.norm(self.normal)
        if abs(nrm - 1.0) > 1e-12:
            raise GeometryError(f"hyperplane normal must be unit length, got {nrm}")

    @classmethod
    def through(cls, point, normal) -> "Hyperplane":
        nvec = unit(as_vector(normal))
        return cls(nvec, float(np.dot(nvec, as_vector(point))))

    def signed_distance(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.normal - self.offset


@dataclass(frozen=True)
class DepthResult:
    depth: int
    witness_direction: np.ndarray
    exact: bool = True
    coincident: tuple[int, ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.coincident)


@dataclass(frozen=True)
class BetaResult:
    beta_max: float
    g_min: float
    argmin_direction: np.ndarray
    exact: bool = True
    resolution: int | None = None


@dataclass(frozen=True)
class KthCosineMin:
    """Minimum over unit directions u of the k-th largest cosine to the points."""

    g_min: float
    direction: np.ndarray
    exact: bool = True
    resolution: int | None = None


def _prepare(S, q) -> tuple[np.ndarray, np.ndarray]:
    P = as_points(S)
    qv = np.asarray(q, dtype=float).reshape(-1)
    if qv.shape[0] != P.shape[1]:
        raise DimensionMismatchError(
            f"query has dimension {qv.shape[0]} but points have dimension {P.shape[1]}"
        )
    return P, qv


def _dirs2(phis: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(phis), np.sin(phis)])


def _critical_angles_2d(V: np.ndarray) -> np.ndarray:
    alphas = np.arctan2(V[:, 1], V[:, 0])
    crit = np.concatenate([alphas + math.pi / 2, alphas - math.pi / 2]) % TWO_PI
    return np.unique(crit)


def _midpoints_circular(sorted_angles: np.ndarray) -> np.ndarray:
    if sorted_angles.size == 0:
        return np.array([0.0])
    nxt = np.append(sorted_angles[1:], sorted_angles[0] + TWO_PI)
    return ((sorted_angles + nxt) / 2.0) % TWO_PI


def _closed_counts(V: np.ndarray, U: np.ndarray) -> np.ndarray:
    return np.count_nonzero(V @ U.T >= -EPS_GEOM, axis=0)


def _strict_counts(V: np.ndarray, U: np.ndarray) -> np.ndarray:
    return np.count_nonzero(V @ U.T > EPS_GEOM, axis=0)


def _depth_2d(V: np.ndarray) -> tuple[int, np.ndarray]:
    live = V[np.linalg.norm(V, axis=1) > EPS_LOC]
    if live.shape[0] == 0:
        return V.shape[0], np.array([1.0, 0.0])
    # the closed count is constant on the open arcs between critical angles
    # and can only jump up on the arc endpoints
    mids = _midpoints_circular(_critical_angles_2d(live))
    U = _dirs2(mids)
    counts = _closed_counts(V, U)
    i = int(np.argmin(counts))
    return int(counts[i]), U[i]


def _span_basis(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, V.shape[1]))
    r = int(np.count_nonzero(s > tol * s[0]))
    return vt[:r]


def _vertex_normals(V: np.ndarray):
    """Unit normals orthogonal to every full-rank (m-1)-subset of the rows of V."""
    n, m = V.shape
    for idx in combinations(range(n), m - 1):
        A = V[list(idx)]
        _, s, vt = np.linalg.svd(A, full_matrices=True)
        if s[-1] <= 1e-12 * max(s[0], 1e-300):
            continue
        yield idx, vt[-1]


def _depth_nd(V: np.ndarray) -> tuple[int, np.ndarray]:
    n, m = V.shape
    live_mask = np.linalg.norm(V, axis=1) > EPS_LOC
    live = V[live_mask]
    if live.shape[0] == 0:
        e0 = np.zeros(m)
        e0[0] = 1.0
        return n, e0
    basis = _span_basis(live)
    r = basis.shape[0]
    if r < m:
        # work inside the span; the orthogonal complement is counted on both sides
        W = V @ basis.T
        if r == 1:
            dots = W[:, 0]
            up = int(np.count_nonzero(dots >= -EPS_GEOM))
            down = int(np.count_nonzero(dots <= EPS_GEOM))
            sub = np.array([1.0]) if up <= down else np.array([-1.0])
            return min(up, down), sub @ basis
        d, w = _depth_2d(W) if r == 2 else _depth_nd(W)
        return d, unit(w @ basis)

    best_count, best_u = None, None
    for idx, u in _vertex_normals(live):
        sel = list(idx)
        A = live[sel]
        w = np.linalg.lstsq(A, -np.ones(len(sel)), rcond=None)[0]
        for sgn in (1.0, -1.0):
            uu = sgn * u
            dots = V @ uu
            wd = V @ w
            mask = np.abs(dots) > EPS_GEOM * 10
            ratio = np.abs(dots[mask]) / np.maximum(np.abs(wd[mask]), 1e-300)
            delta = min(1e-3, 0.5 * float(ratio.min())) if ratio.size else 1e-3
            cand = unit(uu + delta * w)
            c = int(np.count_nonzero(V @ cand >= -EPS_GEOM))
            if best_count is None or c < best_count:
                best_count, best_u = c, cand
    if best_u is None:  # pragma: no cover - full rank implies a vertex exists
        raise GeometryError("no arrangement vertex found")
    return best_count, best_u


def halfspace_depth(S, q) -> DepthResult:
    """Tukey depth of ``q``: the fewest points in a closed halfspace through q.

    Exact for m = 2 (angular sweep) and for m >= 3 with n <= 15 (enumeration
    of arrangement vertices).  Larger high-dimensional inputs fall back to a
    seeded direction sample and are flagged ``exact=False``.
    """
    P, qv = _prepare(S, q)
    V = P - qv
    coincident = tuple(int(i) for i in np.flatnonzero(np.linalg.norm(V, axis=1) <= EPS_LOC))
    m = P.shape[1]
    if m == 2:
        d, u = _depth_2d(V)
        return DepthResult(d, u, True, coincident)
    if P.shape[0] <= MAX_EXACT_N_HIGHDIM:
        d, u = _depth_nd(V)
        return DepthResult(d, u, True, coincident)
    U = _sphere_directions(m, 20000)
    counts = _closed_counts(V, U)
    i = int(np.argmin(counts))
    return DepthResult(int(counts[i]), U[i], False, coincident)


def _widest_run_center(phis: np.ndarray, hit: np.ndarray) -> float | None:
    """Center angle of the widest circular run of ``hit`` over sorted angles ``phis``."""
    if hit.all():
        return None
    start = int(np.flatnonzero(~hit)[0])
    order = np.roll(np.arange(phis.size), -start)
    best, best_width = None, -1.0
    j = 0
    while j < order.size:
        if not hit[order[j]]:
            j += 1
            continue
        a = j
        while j < order.size and hit[order[j]]:
            j += 1
        lo, hi = phis[order[a]], phis[order[j - 1]]
        width = (hi - lo) % TWO_PI
        if width > best_width + 1e-12:
            best, best_width = (lo + width / 2.0) % TWO_PI, width
    return best


def min_strict_count(S, q) -> tuple[int, np.ndarray]:
    """Fewest points strictly on the positive side of a hyperplane through q.

    The strict count is lower semicontinuous in the direction, so its minimum
    sits on the arrangement boundary: the critical angles in the plane, the
    arrangement vertices in higher dimension.  In the plane the returned
    direction is the center of the widest arc of minimizing directions, the
    witness that stays valid longest as points move.
    """
    P, qv = _prepare(S, q)
    # only directions matter; normalizing makes the sign threshold angular
    V = _normalized(P, qv)
    m = P.shape[1]
    if m == 2:
        crit = _critical_angles_2d(V)
        phis = np.sort(np.concatenate([crit, _midpoints_circular(crit)]))
        U = _dirs2(phis)
        counts = _strict_counts(V, U)
        c = int(counts.min())
        mid = _widest_run_center(phis, counts == c)
        if mid is not None:
            u = _dirs2(np.array([mid]))
            if int(_strict_counts(V, u)[0]) == c:
                return c, u[0]
        return c, U[int(np.argmin(counts))]
    basis = _span_basis(V)
    if basis.shape[0] < m:
        # some direction is orthogonal to every point
        _, _, vt = np.linalg.svd(V, full_matrices=True)
        return 0, vt[-1]
    if P.shape[0] > MAX_EXACT_N_HIGHDIM:
        U = _sphere_directions(m, 20000)
        counts = _strict_counts(V, U)
        i = int(np.argmin(counts))
        return int(counts[i]), U[i]
    best = None
    for _, u in _vertex_normals(V):
        for uu in (u, -u):
            c = int(np.count_nonzero(V @ uu > EPS_GEOM))
            if best is None or c < best[0]:
                best = (c, uu)
    return best


def in_khull_interior(S, q, k: int) -> bool:
    """True iff q lies in the interior of the k-Hull of S.

    Every hyperplane through q must have at least k points strictly on each
    side; this is the same as the k-th largest cosine being positive for
    every direction.
    """
    P, qv = _prepare(S, q)
    n, m = P.shape
    check_helly(k, n, m)
    count, _ = min_strict_count(P, qv)
    return count >= k


def _kth_largest(C: np.ndarray, k: int) -> np.ndarray:
    # C has one row per candidate direction, one column per point
    return -np.partition(-C, k - 1, axis=1)[:, k - 1]


def _normalized(P: np.ndarray, qv: np.ndarray) -> np.ndarray:
    V = P - qv
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms <= EPS_LOC):
        raise CoincidentPointError("query point coincides with an input point")
    return V / norms[:, None]


def _sphere_directions(m: int, count: int, seed: int = 0) -> np.ndarray:
    if m == 3:
        # Fibonacci lattice: quasi-uniform and deterministic
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(1.0 - z * z)
        phi = i * math.pi * (3.0 - math.sqrt(5.0))
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    if m == 2:
        return _dirs2(np.linspace(0.0, TWO_PI, count, endpoint=False))
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((count, m))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def kth_cosine_min(S, q, k: int, grid: int = 20000) -> KthCosineMin:
    """Minimise g(u) = k-th largest of cos(angle(p_i - q, u)) over unit u.

    In the plane the minimiser is one of finitely many candidates: a crossing
    of two cosine curves (bisector of two point angles, or its antipode) or
    the trough of a single curve (antipode of a point angle).  In higher
    dimension a quasi-uniform grid is refined locally with Nelder-Mead.
    """
    P, qv = _prepare(S, q)
    n, m = P.shape
    if not 1 <= k <= n:
        raise GeometryError(f"k={k} must be between 1 and n={n}")
    Vh = _normalized(P, qv)
    if m == 2:
        alphas = np.arctan2(Vh[:, 1], Vh[:, 0])
        ii, jj = np.triu_indices(n, 1)
        bis = (alphas[ii] + alphas[jj]) / 2.0
        phis = np.concatenate([bis, bis + math.pi, alphas + math.pi]) % TWO_PI
        U = _dirs2(phis)
        g = _kth_largest(U @ Vh.T, k)
        i = int(np.argmin(g))
        return KthCosineMin(float(g[i]), U[i], True, None)

    from scipy.optimize import minimize

    U = _sphere_directions(m, grid)
    g = _kth_largest(U @ Vh.T, k)
    order = np.argsort(g, kind="stable")[:8]

    def obj(x):
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return 2.0
        return float(_kth_largest((Vh @ (x / nx))[None, :], k)[0])

    best_val, best_u = float(g[order[0]]), U[order[0]]
    for j in order:
        res = minimize(obj, U[j], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if res.fun < best_val:
            best_val, best_u = float(res.fun), unit(res.x)
    return KthCosineMin(best_val, best_u, False, grid)


def beta_max(S, q, k: int, grid: int = 20000) -> BetaResult:
    """Half angle of the cone that always holds k pursuers, ``arccos(min g)``.

    Raises NotInteriorError carrying the offending direction when q is not
    strictly inside the k-Hull (min g <= 0).
    """
    res = kth_cosine_min(S, q, k, grid=grid)
    if res.g_min <= EPS_GEOM:
        raise NotInteriorError(
            f"query is not strictly inside the {k}-Hull (min k-th cosine {res.g_min:.3e})",
            direction=res.direction,
            g_value=res.g_min,
        )
    g = min(res.g_min, 1.0)
    return BetaResult(math.acos(g), g, res.direction, res.exact, res.resolution)


def in_cone(q_from, axis, half_angle: float, x) -> bool:
    """Closed cone membership; a zero axis makes the cone all of space."""
    qv = as_vector(q_from)
    av = as_vector(axis, qv.shape[0])
    xv = as_vector(x, qv.shape[0])
    if np.linalg.norm(av) <= 1e-15:
        return True
    d = xv - qv
    if np.linalg.norm(d) <= EPS_LOC:
        return True
    return angle_between(d, av) <= half_angle + EPS_ANG


def _clip_convex(poly: list[np.ndarray], a: np.ndarray, b: float) -> list[np.ndarray]:
    """Clip a convex polygon to the halfplane a . x <= b."""
    out: list[np.ndarray] = []
    if not poly:
        return out
    vals = [float(np.dot(a, v) - b) for v in poly]
    for i, cur in enumerate(poly):
        prev = poly[i - 1]
        vc, vp = vals[i], vals[i - 1]
        if vc <= EPS_GEOM:
            if vp > EPS_GEOM:
                out.append(prev + (cur - prev) * (vp / (vp - vc)))
            out.append(cur)
        elif vp <= EPS_GEOM:
            out.append(prev + (cur - prev) * (vp / (vp - vc)))
    return out


def _clean_polygon(poly: list[np.ndarray], tol: float = 1e-9) -> list[np.ndarray]:
    pts: list[np.ndarray] = []
    for v in poly:
        if not pts or np.linalg.norm(v - pts[-1]) > tol:
            pts.append(v)
    while len(pts) > 1 and np.linalg.norm(pts[0] - pts[-1]) <= tol:
        pts.pop()
    changed = True
    while changed and len(pts) > 2:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            ab, bc = b - a, c - b
            cross = ab[0] * bc[1] - ab[1] * bc[0]
            if abs(cross) <= tol * max(np.linalg.norm(ab) * np.linalg.norm(bc), tol):
                pts.pop(i)
                changed = True
                break
    return pts


def polygon_area(vertices) -> float:
    V = np.asarray(vertices, dtype=float)
    if V.shape[0] < 3:
        return 0.0
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def khull_boundary_2d(S, k: int, allow_degenerate: bool = False) -> list[np.ndarray]:
    """Vertices of the planar k-Hull in counterclockwise order.

    Brute force: every line through two input points that leaves at most k-1
    points strictly on one side contributes the opposite closed halfplane;
    the halfplanes are intersected by successive convex clipping.

    An empty region gives ``[]``.  A region with empty interior (a point or a
    segment) raises DegenerateHullError unless ``allow_degenerate`` is set.
    """
    P = as_points(S)
    n, m = P.shape
    if m != 2:
        raise DimensionMismatchError("khull_boundary_2d needs planar points")
    if n > MAX_POLYGON_N:
        raise GeometryError(f"khull_boundary_2d is limited to n <= {MAX_POLYGON_N}")
    check_helly(k, n, m)

    lo, hi = P.min(axis=0), P.max(axis=0)
    pad = 1.0 + float(np.max(hi - lo))
    poly = [np.array([lo[0] - pad, lo[1] - pad]), np.array([hi[0] + pad, lo[1] - pad]),
            np.array([hi[0] + pad, hi[1] + pad]), np.array([lo[0] - pad, hi[1] + pad])]
    for i, j in combinations(range(n), 2):
        d = P[j] - P[i]
        length = np.linalg.norm(d)
        if length <= EPS_LOC:
            continue
        nrm = np.array([-d[1], d[0]]) / length
        s = (P - P[i]) @ nrm
        left = int(np.count_nonzero(s > EPS_GEOM))
        right = int(np.count_nonzero(s < -EPS_GEOM))
        b = float(np.dot(nrm, P[i]))
        if left <= k - 1:
            poly = _clip_convex(poly, nrm, b)
        if right <= k - 1:
            poly = _clip_convex(poly, -nrm, -b)
        if not poly:
            return []
    poly = _clean_polygon(poly)
    if not poly:
        return []
    if polygon_area(poly) < 0:
        poly = poly[::-1]
    if len(poly) < 3 or abs(polygon_area(poly)) <= 1e-12:
        if allow_degenerate:
            return poly
        raise DegenerateHullError(
            f"{k}-Hull has empty interior ({len(poly)} distinct vertices)", vertices=poly
        )
    return poly
