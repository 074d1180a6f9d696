"""Session persistence formats.

One directory per (pid, task) session:

    session.json     descriptor: pid, task, viewport geometry, merge config
    gaze.jsonl       accepted gaze events, one JSON object per line
    transform.jsonl  accepted transform events
    events.jsonl     calibration events
    combined.csv     merged 9-column rows (written on close/merge)
    quality.json     log-quality report (written on close/merge)

All floats serialize via repr(): the shortest string that round-trips to the
exact same double. Timestamps are integers (Unix ms). Files are UTF-8 with LF
line endings, and writers emit a fixed key order so identical data produces
byte-identical files.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Sequence, Union

from .geometry import TransformState, ViewportGeometry
from .sync import CalibrationEvent, CombinedRecord, GazeSample, QualityReport, SyncConfig

SESSION_FILE = "session.json"
GAZE_FILE = "gaze.jsonl"
TRANSFORM_FILE = "transform.jsonl"
EVENTS_FILE = "events.jsonl"
COMBINED_FILE = "combined.csv"
QUALITY_FILE = "quality.json"
GROUND_TRUTH_FILE = "ground_truth.jsonl"

COMBINED_HEADER = "pid,task,x,y,t,s,theta,tx,ty"

_KEY_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class FormatError(ValueError):
    """Malformed persisted data."""


def validate_session_key(pid: str, task: str) -> None:
    """pid/task become path components, so restrict them to a safe charset."""
    for name, value in (("pid", pid), ("task", task)):
        if not _KEY_RE.match(value or ""):
            raise FormatError(f"{name} {value!r} must match {_KEY_RE.pattern}")


def session_dir(data_dir: Union[str, Path], pid: str, task: str) -> Path:
    validate_session_key(pid, task)
    return Path(data_dir) / pid / task


def _f(v: float) -> str:
    return repr(float(v))


def _as_float(obj: dict, key: str) -> float:
    try:
        return float(obj[key])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad or missing float field {key!r}: {obj}") from e


def _as_int(obj: dict, key: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise FormatError(f"bad or missing integer field {key!r}: {obj}")
    return v


# --- JSONL event lines ------------------------------------------------------


def gaze_json_line(s: GazeSample) -> str:
    return '{"xn":%s,"yn":%s,"t":%d}' % (_f(s.xn), _f(s.yn), s.t)


def transform_json_line(tr: TransformState) -> str:
    return '{"s":%s,"theta":%s,"tx":%s,"ty":%s,"t":%d}' % (
        _f(tr.s),
        _f(tr.theta),
        _f(tr.tx),
        _f(tr.ty),
        tr.t,
    )


def event_json_line(ev: CalibrationEvent) -> str:
    return '{"kind":%s,"t":%d}' % (json.dumps(ev.kind), ev.t)


def _parse_line(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON line: {line!r}") from e
    if not isinstance(obj, dict):
        raise FormatError(f"expected JSON object, got {line!r}")
    return obj


def parse_gaze_obj(obj: dict, pid: str, task: str) -> GazeSample:
    return GazeSample(
        pid=pid, task=task, xn=_as_float(obj, "xn"), yn=_as_float(obj, "yn"), t=_as_int(obj, "t")
    )


def parse_transform_obj(obj: dict) -> TransformState:
    return TransformState(
        s=_as_float(obj, "s"),
        theta=_as_float(obj, "theta"),
        tx=_as_float(obj, "tx"),
        ty=_as_float(obj, "ty"),
        t=_as_int(obj, "t"),
    )


def parse_event_obj(obj: dict, pid: str, task: str) -> CalibrationEvent:
    kind = obj.get("kind")
    if not isinstance(kind, str):
        raise FormatError(f"bad or missing event kind: {obj}")
    return CalibrationEvent(pid=pid, task=task, t=_as_int(obj, "t"), kind=kind)


def write_jsonl(path: Union[str, Path], lines: Iterable[str]) -> None:
    Path(path).write_bytes(("".join(line + "\n" for line in lines)).encode("utf-8"))


def append_jsonl(path: Union[str, Path], lines: Iterable[str]) -> None:
    with open(path, "ab") as fh:
        fh.write(("".join(line + "\n" for line in lines)).encode("utf-8"))


def _read_lines(path: Union[str, Path]) -> list[str]:
    p = Path(path)
    if not p.exists():
        return []
    return [ln for ln in p.read_text(encoding="utf-8").split("\n") if ln]


def read_gaze_jsonl(path: Union[str, Path], pid: str, task: str) -> list[GazeSample]:
    return [parse_gaze_obj(_parse_line(ln), pid, task) for ln in _read_lines(path)]


def read_transform_jsonl(path: Union[str, Path]) -> list[TransformState]:
    return [parse_transform_obj(_parse_line(ln)) for ln in _read_lines(path)]


def read_events_jsonl(path: Union[str, Path], pid: str, task: str) -> list[CalibrationEvent]:
    return [parse_event_obj(_parse_line(ln), pid, task) for ln in _read_lines(path)]


# --- combined CSV -----------------------------------------------------------


def combined_csv_bytes(records: Sequence[CombinedRecord]) -> bytes:
    """Bit-exact 9-column CSV; x,y are the normalized gaze values."""
    out = [COMBINED_HEADER]
    for r in records:
        validate_session_key(r.pid, r.task)
        out.append(
            ",".join(
                (r.pid, r.task, _f(r.xn), _f(r.yn), str(r.t), _f(r.s), _f(r.theta), _f(r.tx), _f(r.ty))
            )
        )
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_combined_csv(data: bytes) -> list[CombinedRecord]:
    text = data.decode("utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != COMBINED_HEADER:
        raise FormatError(f"bad combined CSV header: {lines[:1]}")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise FormatError(f"expected 9 columns, got {len(parts)}: {ln!r}")
        pid, task, x, y, t, s, theta, tx, ty = parts
        try:
            records.append(
                CombinedRecord(
                    pid=pid,
                    task=task,
                    xn=float(x),
                    yn=float(y),
                    t=int(t),
                    s=float(s),
                    theta=float(theta),
                    tx=float(tx),
                    ty=float(ty),
                )
            )
        except ValueError as e:
            raise FormatError(f"bad combined CSV row: {ln!r}") from e
    return records


# --- session descriptor and quality report ----------------------------------


def geometry_to_dict(geom: ViewportGeometry) -> dict:
    return {
        "W": float(geom.W),
        "H": float(geom.H),
        "ox": float(geom.ox),
        "oy": float(geom.oy),
        "wd": float(geom.wd),
        "hd": float(geom.hd),
        "wi": float(geom.wi),
        "hi": float(geom.hi),
    }


def geometry_from_dict(obj: dict) -> ViewportGeometry:
    try:
        return ViewportGeometry(**{k: float(obj[k]) for k in ("W", "H", "ox", "oy", "wd", "hd", "wi", "hi")})
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad geometry object: {obj}") from e


def descriptor_bytes(
    pid: str,
    task: str,
    geom: ViewportGeometry,
    created_at: int,
    status: str,
    cfg: SyncConfig,
) -> bytes:
    doc = {
        "pid": pid,
        "task": task,
        "geom": geometry_to_dict(geom),
        "created_at": created_at,
        "status": status,
        "delta_ms": cfg.delta_ms,
        "watermark_slack_ms": cfg.watermark_slack_ms,
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def read_descriptor(path: Union[str, Path]) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read session descriptor {path}: {e}") from e
    doc["geom"] = geometry_from_dict(doc.get("geom", {}))
    return doc


def quality_json_bytes(report: QualityReport) -> bytes:
    return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")


# --- whole-session convenience ----------------------------------------------


class SessionData:
    """Everything persisted for one session, loaded back into memory."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        desc = read_descriptor(self.path / SESSION_FILE)
        self.pid: str = desc["pid"]
        self.task: str = desc["task"]
        self.geom: ViewportGeometry = desc["geom"]
        self.status: str = desc.get("status", "closed")
        self.cfg = SyncConfig(
            delta_ms=int(desc.get("delta_ms", 50)),
            watermark_slack_ms=int(desc.get("watermark_slack_ms", 0)),
        )
        self.gaze = read_gaze_jsonl(self.path / GAZE_FILE, self.pid, self.task)
        self.transforms = read_transform_jsonl(self.path / TRANSFORM_FILE)
        self.events = read_events_jsonl(self.path / EVENTS_FILE, self.pid, self.task)

    def combined(self) -> list[CombinedRecord]:
        p = self.path / COMBINED_FILE
        if not p.exists():
            raise FormatError(f"no combined CSV in {self.path}; run a merge first")
        return parse_combined_csv(p.read_bytes())
