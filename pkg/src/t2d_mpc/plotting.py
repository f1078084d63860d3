"""Report figures: glucose trajectories and prescribed session durations."""

from __future__ import annotations

import io

import numpy as np
from matplotlib.figure import Figure

from .prescription import WHO_MINIMUM_MIN_PER_WEEK

STYLE = {
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
}


def _new_figure(width=5.0, height=3.2):
    import matplotlib as mpl

    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(width, height))
        ax = fig.add_subplot()
    return fig, ax


def glucose_figure(open_loop=None, closed_loop=None) -> Figure:
    """Basal glucose against time; open loop dashed, controlled solid."""
    fig, ax = _new_figure()
    if open_loop is not None:
        ax.plot(open_loop.t, open_loop.G, "k--", lw=1.2, label="open loop")
    if closed_loop is not None:
        ax.plot(closed_loop.t, closed_loop.G, "C0-", lw=1.5, label="MPC")
    ax.set_xlabel("time [days]")
    ax.set_ylabel("G [mg/dl]")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def session_duration_figure(rows, u_bar: float, T: float) -> Figure:
    """Step plot of the recommended session duration, weekly dose on a twin axis.

    ``rows`` are decision-table rows ``(k, t, u_eq, cost, delta_min, weekly_min)``.
    """
    rows = np.asarray(rows, dtype=float)
    t, delta = rows[:, 1], rows[:, 4]
    fig, ax = _new_figure()
    ax.step(np.append(t, t[-1] + T), np.append(delta, delta[-1]), where="post", color="C0")
    ax.set_xlabel("time [days]")
    ax.set_ylabel("session duration [min]")
    ax.set_title(f"intensity {u_bar:g} %, one session every {T:g} d", fontsize=9)
    # WHO minimum expressed as a per-session duration
    ax.axhline(WHO_MINIMUM_MIN_PER_WEEK * T / 7.0, color="0.5", ls=":", lw=1)
    ax.annotate("150 min/week", (t[-1], WHO_MINIMUM_MIN_PER_WEEK * T / 7.0),
                ha="right", va="bottom", fontsize=7, color="0.4")
    ax.set_ylim(bottom=0)
    sec = ax.secondary_yaxis("right", functions=(lambda d: d * 7.0 / T, lambda w: w * T / 7.0))
    sec.set_ylabel("min/week", fontsize=STYLE["axes.labelsize"])
    sec.tick_params(labelsize=STYLE["ytick.labelsize"])
    fig.tight_layout()
    return fig


def figure_bytes(fig: Figure, fmt: str = "png", dpi: int = 150) -> bytes:
    buf = io.BytesIO()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(buf, format=fmt, dpi=dpi, metadata={"Software": None})
    return buf.getvalue()
