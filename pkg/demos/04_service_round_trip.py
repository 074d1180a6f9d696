"""End to end through the wire: simulate, POST to the ingest server, compare.

The logging server buffers both streams, merges with watermarks as events
arrive, and persists everything per session. This demo starts a server on a
random local port, replays a simulated session to it in shuffled batch order,
then checks the server's merged CSV byte-for-byte against a local offline
merge of the same streams.

Run:  python3 demos/04_service_round_trip.py
"""

import tempfile
from pathlib import Path

from gazealign import io
from gazealign.geometry import ViewportGeometry
from gazealign.service import start_server
from gazealign.simulate import FaultModel, Scenario, generate, replay_to_service
from gazealign.sync import merge_offline

geom = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=2400, hi=4000)
scenario = Scenario(
    kind="guided-diamond",
    duration_ms=15_000,
    geom=geom,
    fixation_target_intrinsic=(1000.0, 1600.0),
    gaze_noise_sigma_px=25.0,
    seed=99,
)
session = generate(scenario, FaultModel(timestamp_jitter_ms=35, drop_prob=0.1))
print(f"simulated {len(session.gaze)} gaze + {len(session.transforms)} transform events")

with tempfile.TemporaryDirectory() as tmp:
    server, _ = start_server("127.0.0.1:0", Path(tmp) / "data")
    print(f"ingest service listening at {server.address}")
    try:
        result = replay_to_service(session, server.address, interleaving="seeded-shuffle", batch_size=200)
    finally:
        server.shutdown()
        server.server_close()

    print("\n=== server-side quality report ===")
    for k in ("total_gaze", "matched", "discarded", "matched_pct", "discard_reasons"):
        print(f"  {k}: {result.quality[k]}")

    local_records, _ = merge_offline(session.gaze, session.transforms)
    same = result.combined_csv == io.combined_csv_bytes(local_records)
    print(f"\nserver CSV byte-identical to local offline merge: {same}")
    print(f"persisted session directory: {Path(tmp) / 'data' / 'sim' / 'guided-diamond'}")
