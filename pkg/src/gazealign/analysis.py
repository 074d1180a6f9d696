"""Post-hoc analysis of merged sessions.

Heatmaps accumulate density over a fixed grid in either screen space or
intrinsic-image space; each included sample deposits exactly one unit of mass
through a truncated Gaussian kernel (radius 3 sigma, renormalized after
truncation), so the grid total always equals the included sample count.
Samples flagged off-screen / off-image are excluded by default and counted;
pass include_flagged=True to deposit them anyway (clipped to the grid).

Traces and replay stay faithful to the log: replay holds the latest recorded
state at each frame time instead of interpolating, because fabricated
intermediate states would mask exactly the lag artifacts replay exists to
reveal.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    HomPoint,
    SingularTransformError,
    TransformState,
    ViewportGeometry,
    forward_project,
    off_image,
    off_screen,
    reconstruct,
)
from .sync import CombinedRecord

FRAME_SCREEN = "screen"
FRAME_INTRINSIC = "intrinsic"


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class HeatmapGrid:
    frame: str
    cols: int
    rows: int
    cell_size: tuple[float, float]
    bandwidth: float
    values: np.ndarray = field(compare=False)
    included: int = 0
    excluded: int = 0

    def total_mass(self) -> float:
        return float(self.values.sum())

    def meta_dict(self) -> dict:
        return {
            "frame": self.frame,
            "cols": self.cols,
            "rows": self.rows,
            "cell_size": [self.cell_size[0], self.cell_size[1]],
            "bandwidth": self.bandwidth,
            "included": self.included,
            "excluded": self.excluded,
        }


@dataclass(frozen=True)
class TracePolyline:
    frame: str
    points: list[tuple[float, float, int]]
    dropped: int = 0


@dataclass(frozen=True)
class ReplayFrame:
    frame_time: float
    transform: Optional[TransformState]
    gaze_screen: Optional[tuple[float, float]]
    gaze_intrinsic: Optional[tuple[float, float]]


@dataclass(frozen=True)
class GuidedErrorReport:
    target_intrinsic: tuple[float, float]
    image_px: list[float]
    screen_px: list[float]
    median_image_px: float
    median_screen_px: float
    skipped_singular: int = 0

    def to_dict(self) -> dict:
        return {
            "target_intrinsic": list(self.target_intrinsic),
            "median_image_px": self.median_image_px,
            "median_screen_px": self.median_screen_px,
            "samples": len(self.image_px),
            "skipped_singular": self.skipped_singular,
        }


def _deposit(values: np.ndarray, x: float, y: float, sigma: float, cw: float, ch: float) -> None:
    """Add one unit of mass around (x, y), truncated at 3 sigma and at the
    grid edge, renormalized so the deposit sums to exactly 1."""
    rows, cols = values.shape
    r = 3.0 * sigma
    j0 = max(0, int(math.floor((x - r) / cw)))
    j1 = min(cols - 1, int(math.floor((x + r) / cw)))
    i0 = max(0, int(math.floor((y - r) / ch)))
    i1 = min(rows - 1, int(math.floor((y + r) / ch)))
    if j0 <= j1 and i0 <= i1:
        cxs = (np.arange(j0, j1 + 1) + 0.5) * cw
        cys = (np.arange(i0, i1 + 1) + 0.5) * ch
        d2 = (cys[:, None] - y) ** 2 + (cxs[None, :] - x) ** 2
        w = np.exp(-d2 / (2.0 * sigma * sigma))
        w[d2 > r * r] = 0.0
        total = w.sum()
        if total > 0.0:
            values[i0 : i1 + 1, j0 : j1 + 1] += w / total
            return
    # degenerate kernel (tiny sigma or fully off-grid): nearest cell takes it all
    j = min(cols - 1, max(0, int(math.floor(x / cw))))
    i = min(rows - 1, max(0, int(math.floor(y / ch))))
    values[i, j] += 1.0


def _heatmap(
    frame: str,
    points: Sequence[Optional[tuple[float, float]]],
    flagged: Sequence[bool],
    extent: tuple[float, float],
    cols: int,
    rows: int,
    bandwidth: float,
    include_flagged: bool,
) -> HeatmapGrid:
    if cols < 1 or rows < 1:
        raise AnalysisError(f"grid must be at least 1x1, got {cols}x{rows}")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise AnalysisError(f"bandwidth must be positive, got {bandwidth}")
    cw = extent[0] / cols
    ch = extent[1] / rows
    values = np.zeros((rows, cols), dtype=np.float64)
    included = excluded = 0
    for pt, bad in zip(points, flagged):
        if pt is None or (bad and not include_flagged):
            excluded += 1
            continue
        _deposit(values, pt[0], pt[1], bandwidth, cw, ch)
        included += 1
    return HeatmapGrid(
        frame=frame,
        cols=cols,
        rows=rows,
        cell_size=(cw, ch),
        bandwidth=bandwidth,
        values=values,
        included=included,
        excluded=excluded,
    )


def heatmap_screen(
    records: Sequence[CombinedRecord],
    geom: ViewportGeometry,
    cols: int,
    rows: int,
    bandwidth: Optional[float] = None,
    include_flagged: bool = False,
) -> HeatmapGrid:
    """Gaze density over the display. Off-screen samples are excluded and
    counted unless include_flagged is set."""
    bw = geom.wd / 40.0 if bandwidth is None else bandwidth
    points = [(r.xn * geom.W, r.yn * geom.H) for r in records]
    flagged = [off_screen(r.xn, r.yn) for r in records]
    return _heatmap(FRAME_SCREEN, points, flagged, (geom.W, geom.H), cols, rows, bw, include_flagged)


def heatmap_image(
    records: Sequence[CombinedRecord],
    geom: ViewportGeometry,
    cols: int,
    rows: int,
    bandwidth: Optional[float] = None,
    include_flagged: bool = False,
) -> HeatmapGrid:
    """Gaze density over the intrinsic image after inverse-transform
    reconstruction. Unreconstructable (singular) and off-image samples are
    excluded and counted."""
    bw = geom.wi / 40.0 if bandwidth is None else bandwidth
    points: list[Optional[tuple[float, float]]] = []
    flagged: list[bool] = []
    for r in records:
        try:
            p = reconstruct(r.xn, r.yn, r.transform_state(), geom)
        except SingularTransformError:
            points.append(None)
            flagged.append(True)
            continue
        points.append(p.xy())
        flagged.append(off_image(p, geom))
    return _heatmap(FRAME_INTRINSIC, points, flagged, (geom.wi, geom.hi), cols, rows, bw, include_flagged)


def trace(
    records: Sequence[CombinedRecord], frame: str, geom: ViewportGeometry
) -> TracePolyline:
    """Ordered gaze polyline in the requested frame. Samples whose transform
    cannot be inverted are dropped from the intrinsic trace and counted."""
    points: list[tuple[float, float, int]] = []
    dropped = 0
    if frame == FRAME_SCREEN:
        points = [(r.xn * geom.W, r.yn * geom.H, r.t) for r in records]
    elif frame == FRAME_INTRINSIC:
        for r in records:
            try:
                p = reconstruct(r.xn, r.yn, r.transform_state(), geom)
            except SingularTransformError:
                dropped += 1
                continue
            points.append((p.x, p.y, r.t))
    else:
        raise AnalysisError(f"unknown frame {frame!r}")
    return TracePolyline(frame=frame, points=points, dropped=dropped)


def replay_frames(
    records: Sequence[CombinedRecord], fps: float, geom: ViewportGeometry
) -> list[ReplayFrame]:
    """Step-hold replay at uniform frame spacing 1000/fps ms.

    Each frame carries the latest record at or before its time; nothing is
    interpolated between records.
    """
    if not (math.isfinite(fps) and fps > 0):
        raise AnalysisError(f"fps must be positive, got {fps}")
    if not records:
        return []
    t0 = records[0].t
    duration = records[-1].t - t0
    count = math.floor(duration * fps / 1000.0) + 1
    frames: list[ReplayFrame] = []
    idx = 0
    for k in range(count):
        ft = k * 1000.0 / fps
        cutoff = t0 + ft
        while idx + 1 < len(records) and records[idx + 1].t <= cutoff:
            idx += 1
        held = records[idx]
        if held.t > cutoff:  # frame precedes the first record
            frames.append(ReplayFrame(ft, None, None, None))
            continue
        try:
            gi = reconstruct(held.xn, held.yn, held.transform_state(), geom).xy()
        except SingularTransformError:
            gi = None
        frames.append(
            ReplayFrame(
                frame_time=ft,
                transform=held.transform_state(),
                gaze_screen=(held.xn * geom.W, held.yn * geom.H),
                gaze_intrinsic=gi,
            )
        )
    return frames


def guided_error(
    records: Sequence[CombinedRecord],
    target_intrinsic: tuple[float, float],
    geom: ViewportGeometry,
) -> GuidedErrorReport:
    """Distance of each sample from an instructed fixation target.

    The image-frame distance compares the reconstructed gaze against the
    target in intrinsic pixels. The screen-frame distance is the naive
    baseline: distance to the target's *static* screen position at session
    start, which is what a manipulation-unaware analysis would measure.
    """
    if not records:
        raise AnalysisError("guided_error needs at least one record")
    tx_, ty_ = target_intrinsic
    if not (0.0 <= tx_ <= geom.wi and 0.0 <= ty_ <= geom.hi):
        raise AnalysisError(f"target {target_intrinsic} outside intrinsic bounds")
    target = HomPoint(tx_, ty_)

    xn0, yn0 = forward_project(target, records[0].transform_state(), geom)
    base_x, base_y = xn0 * geom.W, yn0 * geom.H

    image_px: list[float] = []
    screen_px: list[float] = []
    skipped = 0
    for r in records:
        sx, sy = r.xn * geom.W, r.yn * geom.H
        screen_px.append(math.hypot(sx - base_x, sy - base_y))
        try:
            p = reconstruct(r.xn, r.yn, r.transform_state(), geom)
        except SingularTransformError:
            skipped += 1
            continue
        image_px.append(math.hypot(p.x - tx_, p.y - ty_))
    if not image_px:
        raise AnalysisError("no reconstructable samples; cannot compute image-frame median")
    return GuidedErrorReport(
        target_intrinsic=(tx_, ty_),
        image_px=image_px,
        screen_px=screen_px,
        median_image_px=statistics.median(image_px),
        median_screen_px=statistics.median(screen_px),
        skipped_singular=skipped,
    )


def point_rms_spread(points: Sequence[tuple[float, float]]) -> float:
    """RMS distance of a point cloud from its centroid."""
    if not points:
        return 0.0
    arr = np.asarray(points, dtype=float)
    centered = arr - arr.mean(axis=0)
    return float(np.sqrt((centered**2).sum(axis=1).mean()))
