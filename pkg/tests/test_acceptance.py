"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured runtime (run pytest with -s to see them on success)."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from gazealign import io
from gazealign.analysis import guided_error, heatmap_image, heatmap_screen
from gazealign.cli import main as cli_main
from gazealign.geometry import (
    HomPoint,
    Mat3,
    TransformState,
    ViewportGeometry,
    compose_transform,
    forward_project,
    invert_transform,
    reconstruct,
)
from gazealign.service import start_server
from gazealign.simulate import FaultModel, Scenario, generate, replay_to_service
from gazealign.sync import CombinedRecord, GazeSample, SessionBuffer, SyncConfig, merge_offline
from helpers import random_geometry, random_state
from test_sync import brute_force_merge, interleavings

GOLDEN_DIR = Path(__file__).parent / "data" / "golden" / "sim" / "search-compound"


def _report(tag: str, detail: str, elapsed: float, budget: float) -> None:
    assert elapsed < budget, f"{tag} exceeded runtime budget: {elapsed:.2f}s >= {budget}s"
    print(f"[{tag}] PASS {detail} ({elapsed:.2f}s < {budget:.0f}s)")


def test_a1_geometry_round_trip():
    rng = np.random.default_rng(101)
    geoms = [random_geometry(rng) for _ in range(64)]
    t0 = time.perf_counter()
    worst_pt = 0.0
    worst_mat = 0.0
    ident = Mat3.identity()
    for i in range(10_000):
        geom = geoms[i % 64]
        st = random_state(rng)
        target = HomPoint(rng.uniform(0, geom.wi), rng.uniform(0, geom.hi))
        xn, yn = forward_project(target, st, geom)
        back = reconstruct(xn, yn, st, geom)
        worst_pt = max(worst_pt, abs(back.x - target.x), abs(back.y - target.y))
        m = compose_transform(st, geom)
        prod = m @ invert_transform(m)
        for a, b in zip(prod.rows(), ident.rows()):
            for x, y in zip(a, b):
                d = abs(x - y)
                if d > worst_mat:
                    worst_mat = d
    elapsed = time.perf_counter() - t0
    assert worst_pt < 1e-6, f"round-trip error {worst_pt:.2e}"
    assert worst_mat < 1e-9, f"compose*invert deviation {worst_mat:.2e}"
    _report("A1", f"10k round-trips, worst {worst_pt:.1e} px / {worst_mat:.1e} matrix", elapsed, 1.0)


def _random_stream_pair(rng):
    """Jittered regular-rate streams with drops, the merge stress profile."""
    span = 6_000
    drop = rng.uniform(0.0, 0.10)
    gaze_ts = np.arange(0, span, 33) + rng.integers(-80, 81, size=len(range(0, span, 33)))
    tr_ts = np.arange(0, span, 17) + rng.integers(-80, 81, size=len(range(0, span, 17)))
    gaze_ts = np.sort(np.clip(gaze_ts[rng.random(len(gaze_ts)) >= drop], 0, None))[:200]
    tr_ts = np.sort(np.clip(tr_ts[rng.random(len(tr_ts)) >= drop], 0, None))[:200]
    gaze = [GazeSample("p", "t", 0.5, 0.5, int(t)) for t in gaze_ts]
    # a few near-zero scales so the singular-discard path is exercised too
    trs = [
        TransformState(
            s=1e-8 if rng.random() < 0.01 else float(rng.uniform(0.2, 8.0)),
            theta=0.0,
            tx=float(i),
            ty=0.0,
            t=int(t),
        )
        for i, t in enumerate(tr_ts)
    ]
    return gaze, trs


def test_a2_merge_oracle_equivalence():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    for _ in range(1_000):
        gaze, trs = _random_stream_pair(rng)
        records, discarded = merge_offline(gaze, trs)
        exp_records, exp_discarded = brute_force_merge(gaze, trs, 50)
        assert records == exp_records
        assert [r.sync_offset_ms for r in records] == [r.sync_offset_ms for r in exp_records]
        assert [(d.sample, d.reason) for d in discarded] == exp_discarded
    elapsed = time.perf_counter() - t0
    _report("A2", "1000 stream pairs match the brute-force oracle exactly", elapsed, 5.0)


def test_a3_streaming_determinism():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    cases = checked = 0
    while cases < 200:
        n_g = int(rng.integers(0, 5))
        n_t = int(rng.integers(0, 5))
        gaze = [GazeSample("p", "t", 0.5, 0.5, int(t)) for t in np.sort(rng.integers(0, 400, n_g))]
        trs = [
            TransformState(s=1.0, theta=0.0, tx=float(i), ty=0.0, t=int(t))
            for i, t in enumerate(np.sort(rng.integers(0, 400, n_t)))
        ]
        expected, exp_discarded = merge_offline(gaze, trs)
        cases += 1
        for order in interleavings(gaze, trs):
            buf = SessionBuffer("p", "t")
            out = []
            for ev in order:
                out.extend(buf.ingest(ev))
            out.extend(buf.close())
            assert out == expected
            assert buf.discarded == exp_discarded
            checked += 1
    elapsed = time.perf_counter() - t0
    _report("A3", f"{checked} interleavings across 200 cases equal merge_offline", elapsed, 10.0)


def _a4_scenario(noise: float) -> Scenario:
    geom = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=1200, hi=2000)
    return Scenario(
        kind="guided-line",
        duration_ms=30_000,
        geom=geom,
        fixation_target_intrinsic=(600.0, 1000.0),
        gaze_noise_sigma_px=noise,
        seed=404,
        pan_extent_px=600.0,
    )


def _median_errors(sc: Scenario, faults: FaultModel = FaultModel()):
    session = generate(sc, faults)
    records, _ = merge_offline(session.gaze, session.transforms)
    rep = guided_error(records, sc.fixation_target_intrinsic, sc.geom)
    return rep.median_image_px, rep.median_screen_px


def test_a4_dispersion_error_ordering():
    t0 = time.perf_counter()
    img_noisy, scr_noisy = _median_errors(_a4_scenario(noise=30.0))
    assert img_noisy < 0.25 * scr_noisy, f"{img_noisy:.1f} !< 0.25*{scr_noisy:.1f}"
    img_clean, scr_clean = _median_errors(_a4_scenario(noise=0.0))
    assert img_clean < 1.0, f"zero-noise image median {img_clean:.2e}"
    assert scr_clean > 100.0, f"zero-noise screen median {scr_clean:.1f}"
    elapsed = time.perf_counter() - t0
    _report(
        "A4",
        f"600px pan: image {img_noisy:.0f}px vs screen {scr_noisy:.0f}px "
        f"(clean: {img_clean:.1e} vs {scr_clean:.0f})",
        elapsed,
        5.0,
    )


def test_a5_compound_fragility_monotonicity():
    geom = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=2400, hi=4000)

    def median_err(offset_ms: int, speed_deg_s: float) -> float:
        sc = Scenario(
            kind="search-compound",
            duration_ms=12_000,
            geom=geom,
            fixation_target_intrinsic=(800.0, 1300.0),
            seed=505,
            angular_speed_deg_s=speed_deg_s,
        )
        img, _ = _median_errors(sc, FaultModel(pairing_offset_ms=offset_ms))
        return img

    t0 = time.perf_counter()
    offsets = (0, 10, 25, 50, 100)
    errs = [median_err(o, 60.0) for o in offsets]
    assert all(a < b for a, b in zip(errs, errs[1:])), f"offset sweep not increasing: {errs}"
    speeds = (30.0, 60.0, 90.0)
    errs_by_speed = [median_err(50, w) for w in speeds]
    assert all(
        a < b for a, b in zip(errs_by_speed, errs_by_speed[1:])
    ), f"speed sweep not increasing: {errs_by_speed}"
    elapsed = time.perf_counter() - t0
    _report(
        "A5",
        "median error strictly increases with offset "
        f"({', '.join(f'{e:.1f}' for e in errs)}) and angular speed "
        f"({', '.join(f'{e:.1f}' for e in errs_by_speed)})",
        elapsed,
        10.0,
    )


def _np_nearest_matched_pct(gaze, transforms, delta_ms: int) -> float:
    """Vectorized independent reimplementation of the pairing rule."""
    if not gaze:
        return 100.0
    g = np.array([x.t for x in gaze], dtype=np.int64)
    ts = np.array([x.t for x in transforms], dtype=np.int64)
    s = np.array([x.s for x in transforms])
    if len(ts) == 0:
        return 0.0
    j = np.searchsorted(ts, g)
    right = np.clip(j, 0, len(ts) - 1)
    left = np.clip(j - 1, 0, len(ts) - 1)
    d_right = np.where(j < len(ts), np.abs(ts[right] - g), np.iinfo(np.int64).max)
    d_left = np.where(j > 0, np.abs(g - ts[left]), np.iinfo(np.int64).max)
    pick_right = d_right < d_left  # ties go to the earlier (left) transform
    chosen = np.where(pick_right, right, left)
    dist = np.where(pick_right, d_right, d_left)
    matched = (dist <= delta_ms) & (s[chosen] * s[chosen] >= 1e-12)
    return 100.0 * int(matched.sum()) / len(g)


def test_a6_end_to_end_service(tmp_path):
    geom = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=2400, hi=4000)

    def thirty_minutes(task: str, noise: float) -> Scenario:
        return Scenario(
            kind="guided-line",
            duration_ms=1_800_000,
            geom=geom,
            fixation_target_intrinsic=(1200.0, 2000.0),
            gaze_noise_sigma_px=noise,
            seed=606,
            task=task,
        )

    t0 = time.perf_counter()
    faulted = generate(thirty_minutes("faulted", 20.0), FaultModel(timestamp_jitter_ms=80))
    assert len(faulted.gaze) == 54_000 and len(faulted.transforms) == 108_000

    srv, _ = start_server("127.0.0.1:0", tmp_path / "data")
    try:
        result = replay_to_service(faulted, srv.address, interleaving="seeded-shuffle", batch_size=1000)
        local_records, local_discarded = merge_offline(faulted.gaze, faulted.transforms)
        assert result.combined_csv == io.combined_csv_bytes(local_records)
        oracle_pct = _np_nearest_matched_pct(faulted.gaze, faulted.transforms, 50)
        assert result.quality["matched_pct"] == oracle_pct
        assert result.quality["matched_pct"] < 100.0  # faults actually bit

        clean = generate(thirty_minutes("clean", 0.0))
        clean_result = replay_to_service(clean, srv.address, interleaving="seeded-shuffle", batch_size=1000)
        assert clean_result.quality["matched_pct"] == 100.0
    finally:
        srv.shutdown()
        srv.server_close()
    elapsed = time.perf_counter() - t0
    _report(
        "A6",
        f"54k+108k events: server CSV byte-identical, matched {result.quality['matched_pct']:.3f}% "
        "== oracle; clean run 100.0%",
        elapsed,
        60.0,
    )


def test_a7_heatmap_conservation():
    rng = np.random.default_rng(707)
    t0 = time.perf_counter()
    for _ in range(500):
        geom = random_geometry(rng)
        n = int(rng.integers(0, 60))
        records = [
            CombinedRecord(
                pid="p",
                task="t",
                xn=float(rng.uniform(-0.3, 1.3)),
                yn=float(rng.uniform(-0.3, 1.3)),
                t=i,
                s=1e-8 if rng.random() < 0.03 else float(rng.uniform(0.2, 8.0)),
                theta=float(rng.uniform(-math.pi, math.pi)),
                tx=float(rng.uniform(-500, 500)),
                ty=float(rng.uniform(-500, 500)),
            )
            for i in range(n)
        ]
        cols = int(rng.integers(1, 50))
        rows = int(rng.integers(1, 50))
        for grid in (
            heatmap_screen(records, geom, cols, rows),
            heatmap_image(records, geom, cols, rows),
        ):
            assert abs(grid.total_mass() - grid.included) <= 1e-6
            assert grid.included + grid.excluded == n
    elapsed = time.perf_counter() - t0
    _report("A7", "500 sessions conserve mass in both frames", elapsed, 30.0)


def test_a8_format_round_trips(tmp_path):
    rng = np.random.default_rng(808)
    t0 = time.perf_counter()
    for _ in range(1_000):
        n = int(rng.integers(1, 30))
        ts = np.sort(rng.integers(0, 10**6, n))
        records = [
            CombinedRecord(
                pid="p1",
                task="t1",
                xn=float(rng.uniform(-0.2, 1.2)),
                yn=float(rng.uniform(-0.2, 1.2)),
                t=int(t),
                s=float(rng.uniform(0.2, 8.0)),
                theta=float(rng.uniform(-math.pi, math.pi)),
                tx=float(rng.uniform(-2000, 2000)),
                ty=float(rng.uniform(-2000, 2000)),
            )
            for t in ts
        ]
        csv = io.combined_csv_bytes(records)
        assert io.combined_csv_bytes(io.parse_combined_csv(csv)) == csv
        gaze_lines = [io.gaze_json_line(GazeSample("p1", "t1", r.xn, r.yn, r.t)) for r in records]
        reparsed = [io.parse_gaze_obj(__import__("json").loads(ln), "p1", "t1") for ln in gaze_lines]
        assert [io.gaze_json_line(g) for g in reparsed] == gaze_lines
        tr_lines = [io.transform_json_line(r.transform_state()) for r in records]
        retr = [io.parse_transform_obj(__import__("json").loads(ln)) for ln in tr_lines]
        assert [io.transform_json_line(t) for t in retr] == tr_lines

    # pinned seeded pipeline reproduces the checked-in golden files byte-for-byte
    out = tmp_path / "golden_rerun"
    assert (
        cli_main(
            [
                "simulate",
                "--scenario",
                "search-compound",
                "--seed",
                "7",
                "--duration-ms",
                "8000",
                "--gaze-noise-sigma-px",
                "25",
                "--jitter-ms",
                "40",
                "--drop-prob",
                "0.35",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    sdir = out / "sim" / "search-compound"
    assert cli_main(["merge", "--session", str(sdir)]) == 0
    for name in (
        io.SESSION_FILE,
        io.GAZE_FILE,
        io.TRANSFORM_FILE,
        io.EVENTS_FILE,
        io.GROUND_TRUTH_FILE,
        io.COMBINED_FILE,
        io.QUALITY_FILE,
    ):
        assert (sdir / name).read_bytes() == (GOLDEN_DIR / name).read_bytes(), name
    elapsed = time.perf_counter() - t0
    _report("A8", "1000 session round-trips byte-identical; golden pipeline matches", elapsed, 30.0)
