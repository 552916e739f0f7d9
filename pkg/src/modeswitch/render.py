"""Minimal SVG rendering of Bloch trajectories.

Two orthographic projections are drawn side by side: the (u, w) plane and
the (v, w) plane.  No plotting library is used; output is deterministic
text so runs can be diffed byte for byte.
"""

from __future__ import annotations

from .dynamics import ModeState
from .geometry import to_bloch

_W = 840
_H = 460
_R = 170
_CENTERS = ((215, 225), (625, 225))
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _project(point, panel: int) -> tuple[float, float]:
    cx, cy = _CENTERS[panel]
    h = point.u if panel == 0 else point.v
    return (cx + _R * h, cy - _R * point.w)


def _panel_frame(panel: int, label: str) -> list[str]:
    cx, cy = _CENTERS[panel]
    parts = [
        f'<circle cx="{cx}" cy="{cy}" r="{_R}" fill="none" stroke="#888" stroke-width="1"/>',
        f'<line x1="{cx - _R}" y1="{cy}" x2="{cx + _R}" y2="{cy}" '
        'stroke="#bbb" stroke-width="1" stroke-dasharray="4 4"/>',
        f'<circle cx="{cx}" cy="{cy - _R}" r="3" fill="#333"/>',
        f'<circle cx="{cx}" cy="{cy + _R}" r="3" fill="#333"/>',
        f'<text x="{cx}" y="{cy - _R - 10}" text-anchor="middle" '
        f'font-size="12" fill="#333">mode 1</text>',
        f'<text x="{cx}" y="{cy + _R + 18}" text-anchor="middle" '
        f'font-size="12" fill="#333">mode 2</text>',
        f'<text x="{cx}" y="{cy + _R + 36}" text-anchor="middle" '
        f'font-size="13" fill="#000">{label}</text>',
    ]
    return parts


def trajectory_svg(legs: list[list[ModeState]], title: str = "") -> str:
    """Render one or more trajectory legs.

    Each leg is a list of states and gets its own color, so protocol
    segments or cascade stages stay visually distinct.
    """
    body: list[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        body.append(
            f'<text x="{_W // 2}" y="22" text-anchor="middle" '
            f'font-size="14" fill="#000">{title}</text>'
        )
    body.extend(_panel_frame(0, "u-w projection"))
    body.extend(_panel_frame(1, "v-w projection"))
    for panel in (0, 1):
        for i, leg in enumerate(legs):
            if not leg:
                continue
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(
                f"{_fmt(x)},{_fmt(y)}"
                for x, y in (_project(to_bloch(s), panel) for s in leg)
            )
            body.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                'stroke-width="1.5"/>'
            )
        if legs and legs[0]:
            x0, y0 = _project(to_bloch(legs[0][0]), panel)
            body.append(
                f'<circle cx="{_fmt(x0)}" cy="{_fmt(y0)}" r="4" fill="none" '
                'stroke="#000" stroke-width="1.5"/>'
            )
        if legs and legs[-1]:
            x1, y1 = _project(to_bloch(legs[-1][-1]), panel)
            body.append(f'<circle cx="{_fmt(x1)}" cy="{_fmt(y1)}" r="4" fill="#000"/>')
    body.append("</svg>")
    return "\n".join(body) + "\n"


def split_legs(
    samples: list[tuple[float, ModeState]], boundaries: list[float]
) -> list[list[ModeState]]:
    """Split (t, state) samples into legs at the given boundary times."""
    legs: list[list[ModeState]] = []
    current: list[ModeState] = []
    bounds = list(boundaries)
    for t, s in samples:
        current.append(s)
        if bounds and t >= bounds[0] - 1e-15:
            legs.append(current)
            current = [s]
            bounds.pop(0)
    if current:
        legs.append(current)
    return [leg for leg in legs if leg]
