"""Merging two asynchronous event streams under a timestamp tolerance.

Gaze samples arrive at ~30 Hz from the tracker; transform states arrive at
~60 Hz from the UI layer. Neither stream knows about the other, clocks
jitter, and packets drop. The merge pairs every gaze sample with the nearest
transform within 50 ms or discards it, and the streaming path (what the
ingest server runs) must produce the same answer as the offline batch merge
no matter how the two streams interleave on arrival.

Run:  python3 demos/02_stream_merge.py
"""

import numpy as np

from gazealign import GazeSample, SessionBuffer, SyncConfig, TransformState, merge_offline, quality

rng = np.random.default_rng(4)

# --- build two jittery streams over ~3 seconds ------------------------------
gaze = [
    GazeSample("p1", "demo", 0.5, 0.5, int(t))
    for t in np.sort(1000 + np.arange(0, 3000, 33) + rng.integers(-60, 61, size=91))
]
transforms = [
    TransformState(s=1.0, theta=0.0, tx=float(i), ty=0.0, t=int(t))
    for i, t in enumerate(np.sort(1000 + np.arange(0, 3000, 17) + rng.integers(-60, 61, size=177)))
    if rng.random() > 0.3  # drop a third of them to force some discards
]
print(f"{len(gaze)} gaze samples, {len(transforms)} transform states (30% dropped)\n")

# --- offline merge -----------------------------------------------------------
records, discarded = merge_offline(gaze, transforms, SyncConfig(delta_ms=50))
print("=== offline merge ===")
print(f"matched {len(records)}, discarded {len(discarded)}")
offsets = [r.sync_offset_ms for r in records]
print(f"pairing offsets: min {min(offsets)} ms, median {int(np.median(offsets))} ms, max {max(offsets)} ms")
for d in discarded[:3]:
    print(f"  discarded t={d.sample.t}: {d.reason}")
print()

# --- the streaming path gives the identical answer --------------------------
# interleave arrivals adversarially: all transforms first, then all gaze
buf = SessionBuffer("p1", "demo", SyncConfig(delta_ms=50))
streamed = []
for tr in transforms:
    streamed.extend(buf.ingest(tr))
for g in gaze:
    streamed.extend(buf.ingest(g))
streamed.extend(buf.close())
print("=== streaming merge, worst-case arrival order ===")
print(f"identical to offline: {streamed == records}\n")

# --- the log-quality report --------------------------------------------------
report = quality(records, discarded)
print("=== quality report ===")
for k, v in report.to_dict().items():
    if k != "per_task":
        print(f"  {k}: {v}")
