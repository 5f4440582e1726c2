"""Static figures for traces and batch summaries (matplotlib, no display needed)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

from . import geometry as geo  # noqa: E402
from .bounded import arena_from_dict  # noqa: E402
from .errors import GeometryError  # noqa: E402


def _khull_polygon(P0: np.ndarray, k: int):
    try:
        return geo.khull_boundary_2d(P0, k, allow_degenerate=True)
    except GeometryError:
        return []


def plot_trace(trace, path, khull: bool = True, title: str | None = None) -> None:
    """Trajectories of every agent, one line each, plus the initial k-Hull.

    Lines carry SVG ids ``agent-e`` and ``agent-p<i>``; the k-Hull patch is
    ``khull``.  Only planar traces are supported.
    """
    d = trace.to_dict() if hasattr(trace, "to_dict") else trace
    E = np.array([s["e"] for s in d["steps"]], dtype=float)
    P = np.array([s["p"] for s in d["steps"]], dtype=float)
    if E.shape[1] != 2:
        raise ValueError("trajectory plots need planar traces")
    h = d["header"]
    fig, ax = plt.subplots(figsize=(6, 6))
    if khull and h.get("policy") != "sgall_like":
        poly = _khull_polygon(P[0], int(h["k"]))
        if len(poly) >= 2:
            patch = Polygon(np.array(poly), closed=True, alpha=0.15, color="tab:green",
                            label=f"{h['k']}-Hull at t=0")
            patch.set_gid("khull")
            ax.add_patch(patch)
    arena = h.get("arena")
    if arena and arena.get("kind") == "ball":
        ax.add_patch(Circle(arena["center"], arena["radius"], fill=False, color="0.4", lw=1))
    elif arena and arena.get("kind") == "polytope":
        verts = arena_from_dict(arena).vertices
        ax.add_patch(Polygon(verts, closed=True, fill=False, color="0.4", lw=1))
    cmap = plt.get_cmap("tab10")
    for i in range(P.shape[1]):
        (line,) = ax.plot(P[:, i, 0], P[:, i, 1], "-", lw=1, color=cmap(i % 10), label=f"p{i}")
        line.set_gid(f"agent-p{i}")
        ax.plot(P[0, i, 0], P[0, i, 1], "o", ms=3, color=cmap(i % 10))
    (line,) = ax.plot(E[:, 0], E[:, 1], "-", lw=1.5, color="black", label="evader")
    line.set_gid("agent-e")
    ax.plot(E[0, 0], E[0, 1], "k*", ms=8)
    ax.set_aspect("equal", adjustable="datalim")
    outcome = d.get("outcome") or {}
    ax.set_title(title or f"{h.get('policy')} vs {h.get('evader_strategy', {}).get('kind')}: "
                          f"{outcome.get('kind')} at t={outcome.get('time')}")
    if P.shape[1] <= 10:
        ax.legend(fontsize=7, loc="best")
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def plot_batch_ratios(rows: list[dict], path) -> None:
    """Capture time over its bound for every captured run, sorted."""
    ratios = sorted(float(r["ratio"]) for r in rows
                    if r.get("ratio") not in (None, "") and r.get("outcome") == "k_captured")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if ratios:
        ax.plot(np.arange(len(ratios)), ratios, ".", ms=3)
        ax.set_yscale("log")
    ax.axhline(1.0, color="tab:red", lw=1, label="bound")
    ax.set_xlabel("run (sorted)")
    ax.set_ylabel("capture time / bound")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)
