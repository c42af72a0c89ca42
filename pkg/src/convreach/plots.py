"""Matplotlib scenes for 2-D fixtures, rendered to SVG next to the reports."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle

from .geometry import Ball, BallIntersection, Box, MembershipPredicate
from .pendulum import CellGrid


def _set_outline(ax, contains, box: Box, resolution: int = 300):
    xs = np.linspace(box.lo[0], box.hi[0], resolution)
    ys = np.linspace(box.lo[1], box.hi[1], resolution)
    XX, YY = np.meshgrid(xs, ys)
    ZZ = np.empty_like(XX)
    for i in range(resolution):
        for j in range(resolution):
            ZZ[i, j] = 1.0 if contains(np.array([XX[i, j], YY[i, j]])) else 0.0
    ax.contour(XX, YY, ZZ, levels=[0.5], colors="k", linewidths=1.2)


def render_set_scene(pred: MembershipPredicate, witness: Optional[dict] = None,
                     title: str = "") -> plt.Figure:
    """Set outline with an optional oracle witness (pair, center, probe)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    _set_outline(ax, pred.contains, pred.box, resolution=200)
    if witness is not None:
        x = np.asarray(witness["x"])
        y = np.asarray(witness["y"])
        probe = np.asarray(witness["probe"])
        ax.plot(*np.stack([x, y]).T, "bo-", ms=4, lw=1, label="witness pair")
        ax.plot(probe[0], probe[1], "rx", ms=8, label="escaped probe")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title(title)
    return fig


def render_reach_scene(init: Ball, approx: BallIntersection,
                       flowed_samples: Optional[np.ndarray] = None,
                       title: str = "") -> plt.Figure:
    """Initial ball, flowed samples, patch circles and half-space lines."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.add_patch(Circle(init.center, init.radius, fill=False,
                        edgecolor="tab:blue", lw=1.2, label="initial set"))
    for k, p in enumerate(approx.patches):
        c = p.point - p.radius * p.normal
        ax.add_patch(Circle(c, p.radius, fill=False, edgecolor="tab:red",
                            lw=0.8, alpha=0.7,
                            label="supporting balls" if k == 0 else None))
        # half-space boundary through the patch point, orthogonal to the normal
        tang = np.array([-p.normal[1], p.normal[0]])
        seg = np.stack([p.point - 2.0 * tang, p.point + 2.0 * tang])
        ax.plot(seg[:, 0], seg[:, 1], color="tab:gray", lw=0.8, ls="--",
                label="half-space edges" if k == 0 else None)
        ax.plot(p.point[0], p.point[1], "k.", ms=4)
    if flowed_samples is not None:
        ax.plot(flowed_samples[:, 0], flowed_samples[:, 1], ".",
                color="tab:green", ms=1, alpha=0.5, label="flowed samples")
    pts = np.stack([p.point for p in approx.patches])
    span = max(1.0, float(np.abs(pts).max()) * 0.5)
    ax.set_xlim(pts[:, 0].min() - span, pts[:, 0].max() + span)
    ax.set_ylim(pts[:, 1].min() - span, pts[:, 1].max() + span)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(title)
    return fig


def render_abstraction_scene(grid: CellGrid, source: int,
                             approxs: Sequence[BallIntersection],
                             labels: Sequence[str], title: str = "") -> plt.Figure:
    """Cells plus the over-approximation outlines for each control."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for idx, b in enumerate(grid.boxes):
        w, h = b.hi - b.lo
        face = "#dde8f5" if idx == source else "none"
        ax.add_patch(plt.Rectangle(b.lo, w, h, fill=face != "none",
                                   facecolor=face, edgecolor="0.6", lw=0.6))
    colors = ["tab:red", "tab:purple", "tab:orange", "tab:brown"]
    lo = np.min([b.lo for b in grid.boxes], axis=0)
    hi = np.max([b.hi for b in grid.boxes], axis=0)
    xs = np.linspace(lo[0], hi[0], 220)
    ys = np.linspace(lo[1], hi[1], 220)
    XX, YY = np.meshgrid(xs, ys)
    for k, (approx, lab) in enumerate(zip(approxs, labels)):
        ZZb = np.zeros_like(XX)
        ZZh = np.zeros_like(XX)
        for i in range(XX.shape[0]):
            for j in range(XX.shape[1]):
                z = np.array([XX[i, j], YY[i, j]])
                ZZb[i, j] = 1.0 if approx.contains(z) else 0.0
                ZZh[i, j] = 1.0 if approx.contains_halfspaces(z) else 0.0
        color = colors[k % len(colors)]
        ax.contour(XX, YY, ZZb, levels=[0.5], colors=[color], linewidths=1.4)
        ax.contour(XX, YY, ZZh, levels=[0.5], colors=[color], linewidths=0.9,
                   linestyles="dashed")
        ax.plot([], [], color=color, lw=1.4, label=f"{lab} (balls)")
        ax.plot([], [], color=color, lw=0.9, ls="--", label=f"{lab} (half-spaces)")
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_title(title)
    return fig
