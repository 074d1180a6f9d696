"""Screen-space analysis lies under manipulation; content-space analysis doesn't.

We simulate a participant reading rotated text: the image starts sideways,
the participant rotates it upright and reads line by line. In screen space
the gaze forms arcs (the rotation drags it around); reconstructed into the
image's own frame the same samples form clean left-to-right reading lines.

Outputs land in demos/output/: heatmap and trace PNGs for both frames plus
replay frames for scrubbing through the session.

Run:  python3 demos/03_heatmaps_and_traces.py
"""

from pathlib import Path

from gazealign.analysis import (
    heatmap_image,
    heatmap_screen,
    point_rms_spread,
    replay_frames,
    trace,
)
from gazealign.geometry import ViewportGeometry
from gazealign.render import render_heatmap_png, render_replay_pngs, render_trace_png
from gazealign.simulate import FaultModel, Scenario, generate
from gazealign.sync import merge_offline

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

geom = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=2400, hi=4000)
scenario = Scenario(
    kind="reading-rotated",
    duration_ms=20_000,
    geom=geom,
    fixation_target_intrinsic=(1200.0, 2000.0),
    gaze_noise_sigma_px=18.0,
    seed=12,
)
session = generate(scenario, FaultModel(timestamp_jitter_ms=10))
records, discarded = merge_offline(session.gaze, session.transforms)
print(f"simulated {len(session.gaze)} gaze samples; merged {len(records)}, discarded {len(discarded)}\n")

# --- heatmaps: the paper-style side-by-side contrast -------------------------
screen_grid = heatmap_screen(records, geom, cols=86, rows=96)
image_grid = heatmap_image(records, geom, cols=96, rows=80)
render_heatmap_png(screen_grid, out / "reading_heatmap_screen.png")
render_heatmap_png(image_grid, out / "reading_heatmap_intrinsic.png")
print(f"screen heatmap:    {screen_grid.included} samples -> {out / 'reading_heatmap_screen.png'}")
print(f"intrinsic heatmap: {image_grid.included} samples -> {out / 'reading_heatmap_intrinsic.png'}")

# --- traces: arcs on screen, reading lines on the image ----------------------
screen_trace = trace(records, "screen", geom)
image_trace = trace(records, "intrinsic", geom)
render_trace_png(screen_trace, (geom.W, geom.H), out / "reading_trace_screen.png")
render_trace_png(image_trace, (geom.wi, geom.hi), out / "reading_trace_intrinsic.png")
s_spread = point_rms_spread([(x, y) for x, y, _ in screen_trace.points])
i_spread = point_rms_spread([(x, y) for x, y, _ in image_trace.points])
print(f"\nRMS spread: screen {s_spread:.0f} px vs intrinsic {i_spread:.0f} px")
print("the screen trace arcs with the rotation; the intrinsic trace is reading lines")

# --- replay: step-hold scrubbing of transform + gaze in lockstep --------------
frames = replay_frames(records, fps=10, geom=geom)
index = render_replay_pngs(frames, geom, out / "reading_replay")
print(f"\nreplay: {len(frames)} frames -> {index.parent}")
