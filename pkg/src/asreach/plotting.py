"""Static SVG figures of planar scenarios and trajectories."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

from .control import Trajectory  # noqa: E402
from .errors import DimensionNot2D  # noqa: E402
from .geometry import BallCover, polygon_vertices  # noqa: E402

# fixed ids and no timestamps so identical inputs give identical bytes
_RC = {
    "svg.hashsalt": "asreach",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

SAFE_COLOR = "#dfe9f5"
COVER_COLOR = "#7a9cc6"
TRAJ_COLOR = "#c0392b"


def _view_box(sc, traj: Trajectory | None, cover: BallCover | None):
    pts = [np.asarray(sc.x_s, float), np.asarray(sc.x_t, float)]
    if traj is not None and len(traj.y):
        pts.extend(traj.y)
    if sc.safety is not None and sc.safety.bounds is not None:
        lo, hi = sc.safety.bounds
        pts.extend([lo, hi])
    if sc.ball is not None:
        c = np.asarray(sc.ball.center, float)
        pts.extend([c - sc.ball.radius, c + sc.ball.radius])
    if cover is not None:
        for b in cover.balls:
            c = np.asarray(b.center, float)
            pts.extend([c - b.radius, c + b.radius])
    pts = np.array(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo) or 1.0)
    return lo - pad, hi + pad


def draw_scenario(ax, sc, traj: Trajectory | None = None, cover: BallCover | None = None) -> None:
    if len(sc.x_s) != 2:
        raise DimensionNot2D(f"rendering needs a 2-D scenario, got {len(sc.x_s)}-D")
    lo, hi = _view_box(sc, traj, cover)
    if sc.safety is not None:
        for p in sc.safety.members:
            v = polygon_vertices(p, (lo, hi))
            if len(v) >= 3:
                ax.add_patch(Polygon(v, closed=True, facecolor=SAFE_COLOR, edgecolor="#5d6d7e", lw=0.8))
    if sc.ball is not None:
        ax.add_patch(Circle(sc.ball.center, sc.ball.radius, facecolor=SAFE_COLOR,
                            edgecolor="#5d6d7e", lw=0.8))
    if cover is not None:
        for b in cover.balls:
            ax.add_patch(Circle(b.center, b.radius, fill=False, edgecolor=COVER_COLOR, lw=0.5, ls="--"))
    if traj is not None and traj.n_steps > 0:
        line, = ax.plot(traj.y[:, 0], traj.y[:, 1], color=TRAJ_COLOR, lw=0.7, label="trajectory")
        line.set_gid("trajectory")
    ax.add_patch(Circle(sc.x_t, sc.eps, fill=False, edgecolor="#1e8449", lw=1.0))
    s, = ax.plot([sc.x_s[0]], [sc.x_s[1]], "o", color="#1f618d", ms=5, label="start")
    s.set_gid("start")
    t, = ax.plot([sc.x_t[0]], [sc.x_t[1]], "*", color="#1e8449", ms=8, label="target")
    t.set_gid("target")
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_xlabel("$y_1$")
    ax.set_ylabel("$y_2$")


def render_svg(sc, traj: Trajectory | None = None, cover: BallCover | None = None,
               out: str | Path | None = None, title: str | None = None) -> bytes:
    """Render to SVG bytes; also written to ``out`` when given."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 5))
        try:
            draw_scenario(ax, sc, traj, cover)
            if title:
                ax.set_title(title)
            ax.legend(loc="best", frameon=False)
            buf = io.BytesIO()
            fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
        finally:
            plt.close(fig)
    data = buf.getvalue()
    if out is not None:
        Path(out).write_bytes(data)
    return data
