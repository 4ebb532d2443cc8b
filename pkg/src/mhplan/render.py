"""Deterministic SVG overlays: hypothesis layers plus labeled trajectories.

The emitter is hand-rolled so identical inputs always produce identical bytes;
there are no timestamps, random ids, or library version strings in the output.
"""

from __future__ import annotations

from .costmap import HypothesisStack
from .lattice import Trajectory

CELL_PX = 24
LEGEND_ROW_PX = 18

# Primary hypothesis first; older hypotheses fade toward lighter tones.
LAYER_COLORS = ("#37474f", "#e2711d", "#9467bd", "#2a9d8f", "#b5651d")
TRAJ_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def polyline_points(traj: Trajectory, scale: float = CELL_PX) -> str:
    return " ".join(f"{_fmt((p.x + 0.5) * scale)},{_fmt((p.y + 0.5) * scale)}"
                    for p in traj.poses)


def svg_overlay(stack: HypothesisStack, trajectories=()) -> str:
    """Render the stack and ``(label, trajectory)`` pairs as an SVG string."""
    entries = list(trajectories)
    w, h = stack.width * CELL_PX, stack.height * CELL_PX
    legend_h = LEGEND_ROW_PX * len(entries) + (10 if entries else 0)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
           f'height="{h + legend_h}" viewBox="0 0 {w} {h + legend_h}">',
           f'<rect x="0" y="0" width="{w}" height="{h + legend_h}" fill="#ffffff"/>']

    out.append('<g stroke="#e8e8e8" stroke-width="1">')
    for x in range(stack.width + 1):
        out.append(f'<line x1="{x * CELL_PX}" y1="0" x2="{x * CELL_PX}" y2="{h}"/>')
    for y in range(stack.height + 1):
        out.append(f'<line x1="0" y1="{y * CELL_PX}" x2="{w}" y2="{y * CELL_PX}"/>')
    out.append("</g>")

    # Oldest hypothesis first so the primary layer lands on top.
    for idx in range(stack.n - 1, -1, -1):
        color = LAYER_COLORS[idx % len(LAYER_COLORS)]
        cmap = stack.maps[idx]
        out.append(f'<g fill="{color}" fill-opacity="0.4">')
        for y in range(cmap.height):
            for x in range(cmap.width):
                if cmap.is_lethal(x, y):
                    out.append(f'<rect x="{x * CELL_PX}" y="{y * CELL_PX}" '
                               f'width="{CELL_PX}" height="{CELL_PX}"/>')
        out.append("</g>")

    for i, (label, traj) in enumerate(entries):
        color = TRAJ_COLORS[i % len(TRAJ_COLORS)]
        out.append(f'<polyline points="{polyline_points(traj)}" fill="none" '
                   f'stroke="{color}" stroke-width="2.5" stroke-opacity="0.9"/>')
        end = traj.end_pose()
        out.append(f'<circle cx="{_fmt((end.x + 0.5) * CELL_PX)}" '
                   f'cy="{_fmt((end.y + 0.5) * CELL_PX)}" r="4" fill="{color}"/>')

    for i, (label, _) in enumerate(entries):
        y = h + 14 + i * LEGEND_ROW_PX
        color = TRAJ_COLORS[i % len(TRAJ_COLORS)]
        out.append(f'<line x1="6" y1="{y - 4}" x2="30" y2="{y - 4}" '
                   f'stroke="{color}" stroke-width="2.5"/>')
        out.append(f'<text x="36" y="{y}" font-family="monospace" '
                   f'font-size="12" fill="#222222">{_escape(label)}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def emit_overlay(stack: HypothesisStack, trajectories, out_path: str) -> str:
    """Write the overlay SVG to ``out_path``; returns the path."""
    svg = svg_overlay(stack, trajectories)
    with open(out_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(svg)
    return out_path
