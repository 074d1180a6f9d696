"""Merge asynchronous gaze and transform streams into combined records.

A gaze sample at time t pairs with the transform state minimizing |t - t'|,
subject to |t - t'| <= delta_ms. Samples with no transform in the window are
discarded and counted. Equal distances resolve to the earlier transform (and
to the earliest arrival among identical timestamps), so the merge is fully
deterministic.

merge_offline() is the normative batch semantics; SessionBuffer implements the
same result incrementally with watermarks: a gaze sample is finalized only
once a transform later than t + delta + slack has been seen (or the session
closes), which makes the streaming output independent of how the two streams
interleave on arrival.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .geometry import DET_EPSILON, TransformState, off_screen

DISCARD_NO_TRANSFORM = "no-transform-in-window"
DISCARD_SINGULAR = "singular-transform"

CALIBRATION_KINDS = ("initial", "recalibration")


class SyncError(ValueError):
    pass


class OrderingError(SyncError):
    """Input stream is not sorted by timestamp."""


class SessionKeyError(SyncError):
    """Event belongs to a different (pid, task) session."""


class SessionClosedError(SyncError):
    """Event arrived for a session that has already been closed."""


@dataclass(frozen=True, slots=True)
class GazeSample:
    """One normalized-screen gaze estimate."""

    pid: str
    task: str
    xn: float
    yn: float
    t: int

    def __post_init__(self):
        if not self.pid or not self.task:
            raise SyncError("pid and task must be nonempty")
        if not (math.isfinite(self.xn) and math.isfinite(self.yn)):
            raise SyncError(f"non-finite gaze ({self.xn}, {self.yn})")
        if self.t < 0:
            raise SyncError(f"negative timestamp {self.t}")


@dataclass(frozen=True, slots=True)
class CalibrationEvent:
    pid: str
    task: str
    t: int
    kind: str

    def __post_init__(self):
        if self.kind not in CALIBRATION_KINDS:
            raise SyncError(f"unknown calibration kind {self.kind!r}")
        if self.t < 0:
            raise SyncError(f"negative timestamp {self.t}")


@dataclass(frozen=True, slots=True)
class SyncConfig:
    delta_ms: int = 50
    watermark_slack_ms: int = 0

    def __post_init__(self):
        if self.delta_ms <= 0:
            raise SyncError(f"delta_ms must be positive, got {self.delta_ms}")
        if self.watermark_slack_ms < 0:
            raise SyncError("watermark_slack_ms must be nonnegative")


@dataclass(frozen=True, slots=True)
class CombinedRecord:
    """The unified log row: a gaze sample plus its matched transform fields.

    sync_offset_ms is bookkeeping (|t - t'| of the pairing) and is not part of
    the serialized 9-column row, so it is excluded from equality.
    """

    pid: str
    task: str
    xn: float
    yn: float
    t: int
    s: float
    theta: float
    tx: float
    ty: float
    sync_offset_ms: Optional[int] = field(default=None, compare=False)

    def transform_state(self) -> TransformState:
        return TransformState(s=self.s, theta=self.theta, tx=self.tx, ty=self.ty, t=self.t)


@dataclass(frozen=True, slots=True)
class DiscardedSample:
    sample: GazeSample
    reason: str


Event = Union[GazeSample, TransformState, CalibrationEvent]


def _is_singular_scale(s: float) -> bool:
    # det of the composed matrix's upper 2x2 block is exactly s^2
    return s * s < DET_EPSILON


def _nearest_transform(
    ts: Sequence[int], lo: int, hi: int, t: int
) -> Optional[tuple[int, int]]:
    """Index and |t - t'| of the nearest transform timestamp in ts[lo:hi].

    Ties resolve to the earlier timestamp, and to the first arrival among
    equal timestamps. Returns None when the window is empty.
    """
    if lo >= hi:
        return None
    j = bisect_left(ts, t, lo, hi)
    right_d = ts[j] - t if j < hi else None
    left_d = t - ts[j - 1] if j > lo else None
    if right_d is not None and (left_d is None or right_d < left_d):
        return j, right_d
    if left_d is None:
        return None
    # earlier side wins on ties; pick the first among duplicate timestamps
    return bisect_left(ts, ts[j - 1], lo, hi), left_d


def _classify(
    g: GazeSample,
    transforms: Sequence[TransformState],
    ts: Sequence[int],
    lo: int,
    hi: int,
    delta_ms: int,
) -> tuple[Optional[CombinedRecord], Optional[DiscardedSample]]:
    near = _nearest_transform(ts, lo, hi, g.t)
    if near is None or near[1] > delta_ms:
        return None, DiscardedSample(g, DISCARD_NO_TRANSFORM)
    tr = transforms[near[0]]
    if _is_singular_scale(tr.s):
        return None, DiscardedSample(g, DISCARD_SINGULAR)
    rec = CombinedRecord(
        pid=g.pid,
        task=g.task,
        xn=g.xn,
        yn=g.yn,
        t=g.t,
        s=tr.s,
        theta=tr.theta,
        tx=tr.tx,
        ty=tr.ty,
        sync_offset_ms=near[1],
    )
    return rec, None


def _check_sorted(ts: Sequence[int], what: str) -> None:
    for a, b in zip(ts, ts[1:]):
        if b < a:
            raise OrderingError(f"{what} stream not sorted: {a} followed by {b}")


def merge_offline(
    gaze: Sequence[GazeSample],
    transforms: Sequence[TransformState],
    cfg: SyncConfig = SyncConfig(),
) -> tuple[list[CombinedRecord], list[DiscardedSample]]:
    """Pair every gaze sample with its nearest in-tolerance transform.

    Both inputs must be sorted by timestamp (ties allowed) and the gaze
    samples must share one (pid, task) key. A transform may serve several
    gaze samples; output order follows the gaze stream.
    """
    gaze_ts = [g.t for g in gaze]
    tr_ts = [tr.t for tr in transforms]
    _check_sorted(gaze_ts, "gaze")
    _check_sorted(tr_ts, "transform")
    keys = {(g.pid, g.task) for g in gaze}
    if len(keys) > 1:
        raise SessionKeyError(f"mixed session keys in gaze stream: {sorted(keys)}")

    records: list[CombinedRecord] = []
    discarded: list[DiscardedSample] = []
    n = len(transforms)
    for g in gaze:
        rec, dis = _classify(g, transforms, tr_ts, 0, n, cfg.delta_ms)
        if rec is not None:
            records.append(rec)
        else:
            discarded.append(dis)
    return records, discarded


class SessionBuffer:
    """Streaming merge state for one (pid, task) session.

    Events within each stream must arrive in nondecreasing timestamp order;
    violators are quarantined and counted rather than matched. Buffered
    transforms older than every window that could still need them are evicted,
    so memory stays proportional to the tolerance window, not the session.
    """

    def __init__(self, pid: str, task: str, cfg: SyncConfig = SyncConfig()):
        self.pid = pid
        self.task = task
        self.cfg = cfg
        self.discarded: list[DiscardedSample] = []
        self.calibration_events: list[CalibrationEvent] = []
        self.quarantined_gaze: list[GazeSample] = []
        self.quarantined_transforms: list[TransformState] = []
        self.quarantined_events: list[CalibrationEvent] = []
        self._pending: list[GazeSample] = []
        self._pending_lo = 0
        self._transforms: list[TransformState] = []
        self._tr_ts: list[int] = []
        self._tr_lo = 0
        self._last_gaze_t: Optional[int] = None
        self._last_tr_t: Optional[int] = None
        self._last_event_t: Optional[int] = None
        self._closed = False

    @property
    def closed(self) -> bool:
        return self._closed

    def ingest(self, event: Event) -> list[CombinedRecord]:
        """Apply one event; returns any records finalized by its arrival."""
        if self._closed:
            raise SessionClosedError(f"session {self.pid}/{self.task} is closed")
        if isinstance(event, GazeSample):
            return self._ingest_gaze(event)
        if isinstance(event, TransformState):
            return self._ingest_transform(event)
        if isinstance(event, CalibrationEvent):
            self._ingest_calibration(event)
            return []
        raise SyncError(f"unsupported event type {type(event).__name__}")

    def close(self) -> list[CombinedRecord]:
        """Flush all pending gaze samples through final matching."""
        if self._closed:
            raise SessionClosedError(f"session {self.pid}/{self.task} already closed")
        self._closed = True
        out = self._finalize(lambda g: True)
        self._pending.clear()
        self._pending_lo = 0
        self._transforms.clear()
        self._tr_ts.clear()
        self._tr_lo = 0
        return out

    def _check_key(self, pid: str, task: str) -> None:
        if (pid, task) != (self.pid, self.task):
            raise SessionKeyError(
                f"event for {pid}/{task} sent to session {self.pid}/{self.task}"
            )

    def _ingest_gaze(self, g: GazeSample) -> list[CombinedRecord]:
        self._check_key(g.pid, g.task)
        if self._last_gaze_t is not None and g.t < self._last_gaze_t:
            self.quarantined_gaze.append(g)
            return []
        self._last_gaze_t = g.t
        self._pending.append(g)
        return self._finalize(self._past_watermark)

    def _ingest_transform(self, tr: TransformState) -> list[CombinedRecord]:
        if self._last_tr_t is not None and tr.t < self._last_tr_t:
            self.quarantined_transforms.append(tr)
            return []
        self._last_tr_t = tr.t
        self._transforms.append(tr)
        self._tr_ts.append(tr.t)
        return self._finalize(self._past_watermark)

    def _ingest_calibration(self, ev: CalibrationEvent) -> None:
        self._check_key(ev.pid, ev.task)
        if self._last_event_t is not None and ev.t < self._last_event_t:
            self.quarantined_events.append(ev)
            return
        self._last_event_t = ev.t
        self.calibration_events.append(ev)

    def _past_watermark(self, g: GazeSample) -> bool:
        horizon = g.t + self.cfg.delta_ms + self.cfg.watermark_slack_ms
        return self._last_tr_t is not None and self._last_tr_t > horizon

    def _finalize(self, ready) -> list[CombinedRecord]:
        out: list[CombinedRecord] = []
        while self._pending_lo < len(self._pending):
            g = self._pending[self._pending_lo]
            if not ready(g):
                break
            self._pending_lo += 1
            rec, dis = _classify(
                g,
                self._transforms,
                self._tr_ts,
                self._tr_lo,
                len(self._tr_ts),
                self.cfg.delta_ms,
            )
            if rec is not None:
                out.append(rec)
            else:
                self.discarded.append(dis)
        self._compact()
        return out

    def _compact(self) -> None:
        # transforms are dead once below every live window's lower edge
        if self._pending_lo < len(self._pending):
            oldest = self._pending[self._pending_lo].t
        elif self._last_gaze_t is not None:
            oldest = self._last_gaze_t
        else:
            return
        floor = oldest - self.cfg.delta_ms
        while self._tr_lo < len(self._tr_ts) and self._tr_ts[self._tr_lo] < floor:
            self._tr_lo += 1
        if self._tr_lo > 4096:
            del self._transforms[: self._tr_lo]
            del self._tr_ts[: self._tr_lo]
            self._tr_lo = 0
        if self._pending_lo > 4096:
            del self._pending[: self._pending_lo]
            self._pending_lo = 0


@dataclass(frozen=True, slots=True)
class TaskQuality:
    total_gaze: int
    matched: int
    discarded: int
    matched_pct: float


@dataclass(frozen=True, slots=True)
class QualityReport:
    """Log-quality summary for a completed session (or a set of them)."""

    total_gaze: int
    matched: int
    discarded: int
    matched_pct: float
    discard_reasons: dict[str, int]
    off_screen: int
    recalibration_events: int
    per_task: dict[str, TaskQuality]
    quarantined_gaze: int = 0
    quarantined_transforms: int = 0

    def to_dict(self) -> dict:
        return {
            "total_gaze": self.total_gaze,
            "matched": self.matched,
            "discarded": self.discarded,
            "matched_pct": self.matched_pct,
            "discard_reasons": dict(self.discard_reasons),
            "off_screen": self.off_screen,
            "recalibration_events": self.recalibration_events,
            "quarantined_gaze": self.quarantined_gaze,
            "quarantined_transforms": self.quarantined_transforms,
            "per_task": {
                task: {
                    "total_gaze": tq.total_gaze,
                    "matched": tq.matched,
                    "discarded": tq.discarded,
                    "matched_pct": tq.matched_pct,
                }
                for task, tq in sorted(self.per_task.items())
            },
        }


def _pct(matched: int, total: int) -> float:
    # an empty session has no failures
    return 100.0 if total == 0 else 100.0 * matched / total


def quality(
    records: Iterable[CombinedRecord],
    discarded: Iterable[DiscardedSample],
    events: Iterable[CalibrationEvent] = (),
    *,
    quarantined_gaze: int = 0,
    quarantined_transforms: int = 0,
) -> QualityReport:
    """Exact counts and percentages for a completed session."""
    records = list(records)
    discarded = list(discarded)
    total = len(records) + len(discarded)

    reasons: dict[str, int] = {}
    for d in discarded:
        reasons[d.reason] = reasons.get(d.reason, 0) + 1

    off = sum(1 for r in records if off_screen(r.xn, r.yn))
    off += sum(1 for d in discarded if off_screen(d.sample.xn, d.sample.yn))

    per_task: dict[str, dict[str, int]] = {}
    for r in records:
        stats = per_task.setdefault(r.task, {"total": 0, "matched": 0})
        stats["total"] += 1
        stats["matched"] += 1
    for d in discarded:
        stats = per_task.setdefault(d.sample.task, {"total": 0, "matched": 0})
        stats["total"] += 1

    return QualityReport(
        total_gaze=total,
        matched=len(records),
        discarded=len(discarded),
        matched_pct=_pct(len(records), total),
        discard_reasons=reasons,
        off_screen=off,
        recalibration_events=sum(1 for e in events if e.kind == "recalibration"),
        per_task={
            task: TaskQuality(
                total_gaze=s["total"],
                matched=s["matched"],
                discarded=s["total"] - s["matched"],
                matched_pct=_pct(s["matched"], s["total"]),
            )
            for task, s in per_task.items()
        },
        quarantined_gaze=quarantined_gaze,
        quarantined_transforms=quarantined_transforms,
    )
