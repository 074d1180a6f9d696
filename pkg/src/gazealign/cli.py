"""Command-line front end.

Subcommands operate on the shared session-directory layout (see io module),
so a directory produced by `simulate` or by the ingest service feeds straight
into `merge`, `reconstruct`, `heatmap`, `trace`, `replay`, and `quality`.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O or transport error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, io
from .analysis import (
    guided_error,
    heatmap_image,
    heatmap_screen,
    replay_frames,
    trace,
)
from .geometry import SingularTransformError, off_image, reconstruct
from .render import render_heatmap_png, render_replay_pngs, render_trace_png
from .service import serve as service_serve
from .simulate import (
    INTERLEAVINGS,
    SCENARIO_KINDS,
    FaultModel,
    Scenario,
    ServiceError,
    TransportError,
    faults_from_dict,
    generate,
    replay_to_service,
    scenario_from_dict,
    write_session_dir,
)
from .sync import SyncConfig, merge_offline, quality

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

DEFAULT_GEOM = {
    "W": 1290.0,
    "H": 2796.0,
    "ox": 45.0,
    "oy": 398.0,
    "wd": 1200.0,
    "hd": 2000.0,
    "wi": 2400.0,
    "hi": 4000.0,
}

RECONSTRUCTED_FILE = "reconstructed.csv"
RECONSTRUCTED_HEADER = "pid,task,xi,yi,t,status"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map argparse's exit-2 behavior onto exit 1
        raise UsageError(f"{self.prog}: {message}")


def _emit(args, doc: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=2))
    else:
        print(text)


def _load_session(path: str) -> io.SessionData:
    return io.SessionData(Path(path))


# --- subcommand implementations ----------------------------------------------


def cmd_serve(args) -> int:
    service_serve(
        args.bind,
        args.data_dir,
        SyncConfig(delta_ms=args.delta_ms, watermark_slack_ms=args.watermark_slack_ms),
        verbose=not args.quiet,
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        sc = scenario_from_dict(doc.get("scenario", doc))
        faults = faults_from_dict(doc["faults"]) if "faults" in doc else _faults_from_args(args)
    else:
        geom = io.geometry_from_dict(DEFAULT_GEOM)
        target = (
            tuple(args.target)
            if args.target
            else (geom.wi / 2.0, geom.hi / 2.0)
        )
        sc = Scenario(
            kind=args.scenario,
            duration_ms=args.duration_ms,
            geom=geom,
            fixation_target_intrinsic=target,
            gaze_rate_hz=args.gaze_rate_hz,
            transform_rate_hz=args.transform_rate_hz,
            gaze_noise_sigma_px=args.gaze_noise_sigma_px,
            seed=args.seed,
            pid=args.pid,
            task=args.task or "",
            pan_extent_px=args.pan_extent_px,
            angular_speed_deg_s=args.angular_speed_deg_s,
            zoom_peak=args.zoom_peak,
        )
        faults = _faults_from_args(args)
    session = generate(sc, faults)
    out_dir = write_session_dir(session, args.out)
    doc = {
        "session_dir": str(out_dir),
        "pid": sc.pid,
        "task": sc.task,
        "gaze_events": len(session.gaze),
        "transform_events": len(session.transforms),
    }
    if args.replay_to:
        result = replay_to_service(
            session, args.replay_to, interleaving=args.interleaving, batch_size=args.batch_size
        )
        doc["server_quality"] = result.quality
    _emit(
        args,
        doc,
        f"wrote {doc['gaze_events']} gaze + {doc['transform_events']} transform events to {out_dir}",
    )
    return EXIT_OK


def _faults_from_args(args) -> FaultModel:
    return FaultModel(
        timestamp_jitter_ms=args.jitter_ms,
        drop_prob=args.drop_prob,
        pairing_offset_ms=args.pairing_offset_ms,
        drift_px_per_min=args.drift_px_per_min,
    )


def cmd_merge(args) -> int:
    sess = _load_session(args.session)
    cfg = sess.cfg if args.delta_ms is None else SyncConfig(delta_ms=args.delta_ms)
    records, discarded = merge_offline(sess.gaze, sess.transforms, cfg)
    report = quality(records, discarded, sess.events)
    (sess.path / io.COMBINED_FILE).write_bytes(io.combined_csv_bytes(records))
    (sess.path / io.QUALITY_FILE).write_bytes(io.quality_json_bytes(report))
    _emit(
        args,
        report.to_dict(),
        f"merged {report.matched}/{report.total_gaze} samples "
        f"({report.matched_pct:.1f}% within {cfg.delta_ms} ms)",
    )
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    sess = _load_session(args.session)
    records = sess.combined()
    lines = [RECONSTRUCTED_HEADER]
    counts = {"ok": 0, "off-image": 0, "singular": 0}
    for r in records:
        try:
            p = reconstruct(r.xn, r.yn, r.transform_state(), sess.geom)
        except SingularTransformError:
            counts["singular"] += 1
            lines.append(f"{r.pid},{r.task},,,{r.t},singular")
            continue
        status = "off-image" if off_image(p, sess.geom) else "ok"
        counts[status] += 1
        lines.append(f"{r.pid},{r.task},{p.x!r},{p.y!r},{r.t},{status}")
    out = Path(args.out) if args.out else sess.path / RECONSTRUCTED_FILE
    out.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    _emit(
        args,
        {"out": str(out), **counts},
        f"reconstructed {counts['ok']} ok, {counts['off-image']} off-image, "
        f"{counts['singular']} singular -> {out}",
    )
    return EXIT_OK


def cmd_heatmap(args) -> int:
    sess = _load_session(args.session)
    records = sess.combined()
    fn = heatmap_screen if args.frame == "screen" else heatmap_image
    grid = fn(
        records,
        sess.geom,
        cols=args.cols,
        rows=args.rows,
        bandwidth=args.bandwidth,
        include_flagged=args.include_flagged,
    )
    out = Path(args.out) if args.out else sess.path / f"heatmap_{args.frame}.png"
    render_heatmap_png(grid, out)
    _emit(
        args,
        {"out": str(out), **grid.meta_dict()},
        f"heatmap ({args.frame}): {grid.included} included, {grid.excluded} excluded -> {out}",
    )
    return EXIT_OK


def cmd_trace(args) -> int:
    sess = _load_session(args.session)
    line = trace(sess.combined(), args.frame, sess.geom)
    extent = (
        (sess.geom.W, sess.geom.H) if args.frame == "screen" else (sess.geom.wi, sess.geom.hi)
    )
    out = Path(args.out) if args.out else sess.path / f"trace_{args.frame}.png"
    render_trace_png(line, extent, out)
    _emit(
        args,
        {"out": str(out), "vertices": len(line.points), "dropped": line.dropped},
        f"trace ({args.frame}): {len(line.points)} vertices -> {out}",
    )
    return EXIT_OK


def cmd_replay(args) -> int:
    sess = _load_session(args.session)
    frames = replay_frames(sess.combined(), args.fps, sess.geom)
    out = Path(args.out) if args.out else sess.path / "replay"
    index = render_replay_pngs(frames, sess.geom, out)
    _emit(
        args,
        {"out": str(out), "frames": len(frames), "index": str(index)},
        f"replay: {len(frames)} frames at {args.fps} fps -> {out}",
    )
    return EXIT_OK


def cmd_quality(args) -> int:
    path = Path(args.session)
    stored = path / io.QUALITY_FILE
    if stored.exists():
        doc = json.loads(stored.read_text(encoding="utf-8"))
    else:
        sess = _load_session(args.session)
        records, discarded = merge_offline(sess.gaze, sess.transforms, sess.cfg)
        doc = quality(records, discarded, sess.events).to_dict()
    _emit(
        args,
        doc,
        f"matched {doc['matched']}/{doc['total_gaze']} ({doc['matched_pct']:.1f}%), "
        f"{doc['recalibration_events']} recalibrations",
    )
    return EXIT_OK


def cmd_guided_error(args) -> int:
    sess = _load_session(args.session)
    rep = guided_error(sess.combined(), tuple(args.target), sess.geom)
    _emit(
        args,
        rep.to_dict(),
        f"median error: {rep.median_image_px:.1f} px (image) vs "
        f"{rep.median_screen_px:.1f} px (static screen baseline)",
    )
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="gazealign", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("serve", cmd_serve, "run the local ingest service")
    sp.add_argument("--bind", default="127.0.0.1:8077")
    sp.add_argument("--data-dir", required=True)
    sp.add_argument("--delta-ms", type=int, default=50)
    sp.add_argument("--watermark-slack-ms", type=int, default=0)
    sp.add_argument("--quiet", action="store_true")

    sp = add("simulate", cmd_simulate, "generate a synthetic session (optionally replay to a server)")
    sp.add_argument("--scenario", choices=SCENARIO_KINDS, default="guided-line")
    sp.add_argument("--duration-ms", type=int, default=30_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gaze-rate-hz", type=float, default=30.0)
    sp.add_argument("--transform-rate-hz", type=float, default=60.0)
    sp.add_argument("--gaze-noise-sigma-px", type=float, default=0.0)
    sp.add_argument("--pid", default="sim")
    sp.add_argument("--task", default="")
    sp.add_argument("--target", type=float, nargs=2, metavar=("XI", "YI"))
    sp.add_argument("--pan-extent-px", type=float)
    sp.add_argument("--angular-speed-deg-s", type=float)
    sp.add_argument("--zoom-peak", type=float)
    sp.add_argument("--jitter-ms", type=int, default=0)
    sp.add_argument("--drop-prob", type=float, default=0.0)
    sp.add_argument("--pairing-offset-ms", type=int, default=0)
    sp.add_argument("--drift-px-per-min", type=float, default=0.0)
    sp.add_argument("--config", help="scenario/fault JSON file overriding the flags")
    sp.add_argument("--out", default="sessions")
    sp.add_argument("--replay-to", metavar="URL")
    sp.add_argument("--interleaving", choices=INTERLEAVINGS, default="sorted")
    sp.add_argument("--batch-size", type=int, default=500)
    sp.add_argument("--json", action="store_true")

    sp = add("merge", cmd_merge, "merge raw session streams into combined.csv + quality.json")
    sp.add_argument("--session", required=True)
    sp.add_argument("--delta-ms", type=int, default=None)
    sp.add_argument("--json", action="store_true")

    sp = add("reconstruct", cmd_reconstruct, "map combined.csv gaze into intrinsic-image pixels")
    sp.add_argument("--session", required=True)
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")

    sp = add("heatmap", cmd_heatmap, "render a gaze density heatmap PNG (+ sidecar JSON)")
    sp.add_argument("--session", required=True)
    sp.add_argument("--frame", choices=("screen", "intrinsic"), default="intrinsic")
    sp.add_argument("--cols", type=int, default=64)
    sp.add_argument("--rows", type=int, default=48)
    sp.add_argument("--bandwidth", type=float, default=None)
    sp.add_argument("--include-flagged", action="store_true")
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")

    sp = add("trace", cmd_trace, "render the ordered gaze polyline PNG")
    sp.add_argument("--session", required=True)
    sp.add_argument("--frame", choices=("screen", "intrinsic"), default="intrinsic")
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")

    sp = add("replay", cmd_replay, "render step-hold replay frames + index JSON")
    sp.add_argument("--session", required=True)
    sp.add_argument("--fps", type=float, default=30.0)
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")

    sp = add("quality", cmd_quality, "print the log-quality report for a session")
    sp.add_argument("--session", required=True)
    sp.add_argument("--json", action="store_true")

    sp = add("guided-error", cmd_guided_error, "distance from an instructed fixation target")
    sp.add_argument("--session", required=True)
    sp.add_argument("--target", type=float, nargs=2, metavar=("XI", "YI"), required=True)
    sp.add_argument("--json", action="store_true")

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ServiceError) as e:
        # all format/sync/geometry/simulation/analysis errors are ValueErrors
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (TransportError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
