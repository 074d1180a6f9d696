"""Deterministic raster exports: identical inputs produce byte-identical PNGs.

Pillow is used directly (no plotting toolkit) so the files carry no
timestamps or environment-dependent metadata.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image, ImageDraw

from .analysis import HeatmapGrid, ReplayFrame, TracePolyline
from .geometry import HomPoint, ViewportGeometry, compose_transform

# dark-to-bright density ramp; the maximum cell maps to the last stop
_STOPS = np.array(
    [
        [0.00, 8, 8, 24],
        [0.25, 48, 18, 107],
        [0.50, 140, 41, 129],
        [0.75, 229, 80, 57],
        [1.00, 253, 231, 120],
    ],
    dtype=float,
)

BACKGROUND = (8, 8, 24)


def _colorize(norm: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB uint8 via the piecewise-linear ramp."""
    xs = _STOPS[:, 0]
    rgb = np.empty(norm.shape + (3,), dtype=np.uint8)
    for c in range(3):
        rgb[..., c] = np.interp(norm, xs, _STOPS[:, c + 1]).astype(np.uint8)
    return rgb


def _write_json(path: Path, doc: dict) -> None:
    path.write_bytes((json.dumps(doc, indent=2) + "\n").encode("utf-8"))


def render_heatmap_png(
    grid: HeatmapGrid, path: Union[str, Path], px_per_cell: int = 4
) -> Path:
    """Write the grid as a PNG plus a sidecar JSON with the grid metadata."""
    path = Path(path)
    peak = float(grid.values.max())
    norm = grid.values / peak if peak > 0 else np.zeros_like(grid.values)
    img = Image.fromarray(_colorize(norm), mode="RGB")
    if px_per_cell != 1:
        img = img.resize((grid.cols * px_per_cell, grid.rows * px_per_cell), Image.NEAREST)
    img.save(path, format="PNG")
    _write_json(path.with_suffix(".json"), grid.meta_dict())
    return path


def render_trace_png(
    polyline: TracePolyline,
    extent: tuple[float, float],
    path: Union[str, Path],
    max_dim: int = 900,
) -> Path:
    """Draw the gaze polyline over its frame extent (screen or intrinsic)."""
    path = Path(path)
    scale = max_dim / max(extent[0], extent[1])
    size = (max(1, math.ceil(extent[0] * scale)), max(1, math.ceil(extent[1] * scale)))
    img = Image.new("RGB", size, BACKGROUND)
    draw = ImageDraw.Draw(img)
    pts = [(p[0] * scale, p[1] * scale) for p in polyline.points]
    if len(pts) >= 2:
        # brighten segments over time so direction is readable
        n = len(pts) - 1
        for i in range(n):
            g = 90 + int(150 * i / max(1, n - 1))
            draw.line([pts[i], pts[i + 1]], fill=(40, g, 220), width=2)
    if pts:
        draw.ellipse(_dot(pts[0], 5), fill=(80, 230, 120))
        draw.ellipse(_dot(pts[-1], 5), fill=(235, 80, 80))
    img.save(path, format="PNG")
    return path


def _dot(center: tuple[float, float], r: float) -> list[float]:
    return [center[0] - r, center[1] - r, center[0] + r, center[1] + r]


def render_replay_pngs(
    frames: Sequence[ReplayFrame],
    geom: ViewportGeometry,
    out_dir: Union[str, Path],
    max_dim: int = 480,
) -> Path:
    """Write one PNG per replay frame plus an index JSON; returns the index path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scale = max_dim / max(geom.W, geom.H)
    size = (max(1, math.ceil(geom.W * scale)), max(1, math.ceil(geom.H * scale)))
    entries = []
    for k, fr in enumerate(frames):
        img = Image.new("RGB", size, BACKGROUND)
        draw = ImageDraw.Draw(img)
        draw.rectangle(
            [geom.ox * scale, geom.oy * scale, (geom.ox + geom.wd) * scale, (geom.oy + geom.hd) * scale],
            outline=(70, 70, 110),
        )
        if fr.transform is not None:
            m = compose_transform(fr.transform, geom)
            quad = []
            for corner in ((0.0, 0.0), (geom.wd, 0.0), (geom.wd, geom.hd), (0.0, geom.hd)):
                q = m.apply(HomPoint(*corner))
                quad.append(((q.x + geom.ox) * scale, (q.y + geom.oy) * scale))
            draw.polygon(quad, outline=(90, 190, 160))
        if fr.gaze_screen is not None:
            draw.ellipse(_dot((fr.gaze_screen[0] * scale, fr.gaze_screen[1] * scale), 4), fill=(235, 80, 80))
        name = f"frame_{k:06d}.png"
        img.save(out / name, format="PNG")
        entries.append({"file": name, "frame_time": fr.frame_time})
    index = out / "index.json"
    _write_json(index, {"count": len(entries), "frames": entries})
    return index
