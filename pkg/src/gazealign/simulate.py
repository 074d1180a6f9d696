"""Synthetic session generator with ground truth and fault injection.

Scenario kinds follow named kinematic presets (speeds, extents, bounds below);
the gaze stream is the forward projection of a content-space target through
the transform trajectory, plus optional Gaussian noise and a linear drift
ramp. With the default rates (transform rate an integer multiple of the gaze
rate, shared epoch) every gaze timestamp has an exactly matching transform
timestamp, so a zero-noise zero-fault session reconstructs to the target at
float precision.

Randomness is split into one substream per channel (noise, per-stream jitter,
per-stream drop) from a single seed, so the draws for one channel do not
depend on whether another channel is enabled: identical (scenario, faults)
always produce byte-identical streams.
"""

from __future__ import annotations

import json
import math
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import io
from .geometry import HomPoint, TransformState, ViewportGeometry, forward_project
from .sync import CalibrationEvent, GazeSample, SyncConfig

EPOCH_MS = 1_700_000_000_000  # fixed synthetic session start

SCENARIO_KINDS = (
    "guided-line",
    "guided-diamond",
    "guided-arc",
    "guided-rotate",
    "reading-pan",
    "reading-rotated",
    "search-compound",
)

# named kinematic presets per scenario kind
PRESETS: dict[str, dict[str, float]] = {
    "guided-line": {"pan_extent_px": 600.0, "angular_speed_deg_s": 0.0, "zoom_peak": 1.0},
    "guided-diamond": {"pan_extent_px": 500.0, "angular_speed_deg_s": 0.0, "zoom_peak": 1.0},
    "guided-arc": {"pan_extent_px": 500.0, "angular_speed_deg_s": 0.0, "zoom_peak": 1.0},
    "guided-rotate": {"pan_extent_px": 0.0, "angular_speed_deg_s": 30.0, "zoom_peak": 1.0},
    "reading-pan": {"pan_extent_px": 600.0, "angular_speed_deg_s": 0.0, "zoom_peak": 1.0},
    "reading-rotated": {"pan_extent_px": 0.0, "angular_speed_deg_s": 45.0, "zoom_peak": 1.0},
    "search-compound": {"pan_extent_px": 400.0, "angular_speed_deg_s": 60.0, "zoom_peak": 2.0},
}

ROTATION_BOUND_RAD = math.radians(75.0)  # compound rotation sweeps past 45 degrees

# reading-line sweep, relative to the intrinsic image
READING_LINES = 6
READING_LINE_WIDTH_FRAC = 0.5
READING_LINE_STEP_FRAC = 0.04


class SimulationError(ValueError):
    pass


class TransportError(RuntimeError):
    """The ingest service could not be reached."""


class ServiceError(RuntimeError):
    """The ingest service rejected a request."""

    def __init__(self, status: int, message: str):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status


@dataclass(frozen=True)
class Scenario:
    kind: str
    duration_ms: int
    geom: ViewportGeometry
    fixation_target_intrinsic: tuple[float, float]
    gaze_rate_hz: float = 30.0
    transform_rate_hz: float = 60.0
    gaze_noise_sigma_px: float = 0.0
    seed: int = 0
    pid: str = "sim"
    task: str = ""
    # kinematic overrides; None takes the preset for the kind
    pan_extent_px: Optional[float] = None
    angular_speed_deg_s: Optional[float] = None
    zoom_peak: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise SimulationError(f"unknown scenario kind {self.kind!r}")
        if self.duration_ms <= 0:
            raise SimulationError("duration_ms must be positive")
        if self.gaze_rate_hz <= 0 or self.transform_rate_hz <= 0:
            raise SimulationError("sample rates must be positive")
        if self.gaze_noise_sigma_px < 0:
            raise SimulationError("gaze_noise_sigma_px must be nonnegative")
        fx, fy = self.fixation_target_intrinsic
        if not (0 <= fx <= self.geom.wi and 0 <= fy <= self.geom.hi):
            raise SimulationError(f"fixation target {self.fixation_target_intrinsic} outside image")
        if not self.task:
            object.__setattr__(self, "task", self.kind)

    def kinematics(self) -> dict[str, float]:
        k = dict(PRESETS[self.kind])
        if self.pan_extent_px is not None:
            k["pan_extent_px"] = self.pan_extent_px
        if self.angular_speed_deg_s is not None:
            k["angular_speed_deg_s"] = self.angular_speed_deg_s
        if self.zoom_peak is not None:
            k["zoom_peak"] = self.zoom_peak
        return k


@dataclass(frozen=True)
class FaultModel:
    """Stream degradations applied after ideal generation.

    timestamp_jitter_ms: symmetric uniform integer jitter, per event.
    drop_prob: independent per-event drop probability, per stream.
    pairing_offset_ms: constant shift added to transform timestamps.
    drift_px_per_min: gaze bias ramp magnitude, applied along the screen
    diagonal (1, 1)/sqrt(2).
    """

    timestamp_jitter_ms: int = 0
    drop_prob: float = 0.0
    pairing_offset_ms: int = 0
    drift_px_per_min: float = 0.0

    def __post_init__(self):
        if self.timestamp_jitter_ms < 0 or self.pairing_offset_ms < 0:
            raise SimulationError("jitter and pairing offset must be nonnegative")
        if not (0.0 <= self.drop_prob < 1.0):
            raise SimulationError("drop_prob must be in [0, 1)")
        if self.drift_px_per_min < 0:
            raise SimulationError("drift_px_per_min must be nonnegative")


@dataclass(frozen=True)
class GroundTruthEntry:
    t: int  # emitted gaze timestamp (after faults)
    true_t: int  # ideal sample time
    target_intrinsic: tuple[float, float]
    transform: TransformState  # true state at true_t
    screen_norm: tuple[float, float]  # pre-noise normalized gaze


@dataclass(frozen=True)
class SimulatedSession:
    scenario: Scenario
    faults: FaultModel
    gaze: list[GazeSample]
    transforms: list[TransformState]
    events: list[CalibrationEvent]
    ground_truth: list[GroundTruthEntry]


def _triangle(p: float, bound: float) -> float:
    """Triangle wave through 0 at p=0 with slope +-1, clipped to [-bound, bound]."""
    if bound <= 0:
        return 0.0
    phase = (p + bound) % (4.0 * bound)
    return abs(phase - 2.0 * bound) - bound


def _transform_at(sc: Scenario, kin: dict[str, float], off_ms: float) -> tuple[float, float, float, float]:
    u = off_ms / sc.duration_ms
    t_s = off_ms / 1000.0
    pan = kin["pan_extent_px"]
    omega = math.radians(kin["angular_speed_deg_s"])
    zoom = kin["zoom_peak"]
    kind = sc.kind
    s, theta, tx, ty = 1.0, 0.0, 0.0, 0.0
    if kind == "guided-line":
        tx = pan * u
    elif kind == "guided-diamond":
        e = pan / 2.0
        seg, frac = divmod(u * 4.0, 1.0)
        corners = [(0.0, 0.0), (e, e), (0.0, 2.0 * e), (-e, e), (0.0, 0.0)]
        i = min(int(seg), 3)
        x0, y0 = corners[i]
        x1, y1 = corners[i + 1]
        tx, ty = x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac
    elif kind == "guided-arc":
        r = pan / 2.0
        phi = math.pi * u
        tx, ty = r * math.sin(phi), r * (1.0 - math.cos(phi))
    elif kind == "guided-rotate":
        theta = _triangle(omega * t_s, math.radians(45.0))
    elif kind == "reading-pan":
        ty = -pan * u
    elif kind == "reading-rotated":
        ramp = min(1.0, 4.0 * u)  # rotate upright during the first quarter, then hold
        theta = ramp * math.pi / 2.0
    elif kind == "search-compound":
        theta = _triangle(omega * t_s, ROTATION_BOUND_RAD)
        s = 1.0 + (zoom - 1.0) * (1.0 - math.cos(2.0 * math.pi * 2.0 * u)) / 2.0
        tx = pan * math.sin(2.0 * math.pi * u)
        ty = 0.5 * pan * math.sin(4.0 * math.pi * u)
    return s, theta, tx, ty


def _target_at(sc: Scenario, off_ms: float) -> tuple[float, float]:
    fx, fy = sc.fixation_target_intrinsic
    if sc.kind in ("reading-pan", "reading-rotated"):
        # sweep left-to-right lines around the target region, stepping down per line
        u = off_ms / sc.duration_ms
        lw = READING_LINE_WIDTH_FRAC * sc.geom.wi
        lh = READING_LINE_STEP_FRAC * sc.geom.hi
        pos = min(u * READING_LINES, READING_LINES - 1e-9)
        line = math.floor(pos)
        frac = pos - line
        x = fx - lw / 2.0 + lw * frac
        y = fy + lh * (line - (READING_LINES - 1) / 2.0)
        return (min(max(x, 0.0), sc.geom.wi), min(max(y, 0.0), sc.geom.hi))
    return (fx, fy)


def _sample_offsets(duration_ms: int, rate_hz: float) -> list[float]:
    # half-open [0, duration): a duration of one period yields exactly one sample
    n = int(duration_ms * rate_hz / 1000.0) + 2
    return [off for off in (k * 1000.0 / rate_hz for k in range(n)) if off < duration_ms]


def generate(scenario: Scenario, faults: FaultModel = FaultModel()) -> SimulatedSession:
    """Produce the gaze/transform/event streams and per-sample ground truth."""
    sc = scenario
    kin = sc.kinematics()
    ss = np.random.SeedSequence(sc.seed)
    noise_rng, gj_rng, tj_rng, gd_rng, td_rng = (
        np.random.default_rng(child) for child in ss.spawn(5)
    )

    tr_offsets = _sample_offsets(sc.duration_ms, sc.transform_rate_hz)
    gaze_offsets = _sample_offsets(sc.duration_ms, sc.gaze_rate_hz)

    transforms = []
    for off in tr_offsets:
        s, theta, tx, ty = _transform_at(sc, kin, round(off))
        transforms.append(TransformState(s=s, theta=theta, tx=tx, ty=ty, t=EPOCH_MS + round(off)))

    gaze: list[GazeSample] = []
    truth: list[GroundTruthEntry] = []
    drift_per_ms = faults.drift_px_per_min / 60000.0
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for off in gaze_offsets:
        ti = round(off)
        s, theta, tx, ty = _transform_at(sc, kin, ti)
        st = TransformState(s=s, theta=theta, tx=tx, ty=ty, t=EPOCH_MS + ti)
        target = _target_at(sc, ti)
        xn, yn = forward_project(HomPoint(*target), st, sc.geom)
        dx = dy = 0.0
        if sc.gaze_noise_sigma_px > 0:
            dx, dy = noise_rng.normal(0.0, sc.gaze_noise_sigma_px, size=2)
        bias = drift_per_ms * ti * inv_sqrt2
        gaze.append(
            GazeSample(
                pid=sc.pid,
                task=sc.task,
                xn=xn + (dx + bias) / sc.geom.W,
                yn=yn + (dy + bias) / sc.geom.H,
                t=EPOCH_MS + ti,
            )
        )
        truth.append(
            GroundTruthEntry(
                t=EPOCH_MS + ti,
                true_t=EPOCH_MS + ti,
                target_intrinsic=target,
                transform=st,
                screen_norm=(xn, yn),
            )
        )

    # faults, applied to the ideal streams
    gaze, truth = _fault_gaze(gaze, truth, faults, gj_rng, gd_rng)
    transforms = _fault_transforms(transforms, faults, tj_rng, td_rng)

    events = [CalibrationEvent(pid=sc.pid, task=sc.task, t=EPOCH_MS, kind="initial")]
    return SimulatedSession(
        scenario=sc,
        faults=faults,
        gaze=gaze,
        transforms=transforms,
        events=events,
        ground_truth=truth,
    )


def _fault_gaze(gaze, truth, faults, jitter_rng, drop_rng):
    n = len(gaze)
    keep = np.ones(n, dtype=bool)
    if faults.drop_prob > 0:
        keep = drop_rng.random(n) >= faults.drop_prob
    jit = np.zeros(n, dtype=np.int64)
    if faults.timestamp_jitter_ms > 0:
        jit = jitter_rng.integers(
            -faults.timestamp_jitter_ms, faults.timestamp_jitter_ms + 1, size=n
        )
    out_g, out_t = [], []
    for i in range(n):
        if not keep[i]:
            continue
        t_new = max(0, gaze[i].t + int(jit[i]))
        out_g.append(replace(gaze[i], t=t_new))
        out_t.append(replace(truth[i], t=t_new))
    order = sorted(range(len(out_g)), key=lambda i: out_g[i].t)
    return [out_g[i] for i in order], [out_t[i] for i in order]


def _fault_transforms(transforms, faults, jitter_rng, drop_rng):
    n = len(transforms)
    keep = np.ones(n, dtype=bool)
    if faults.drop_prob > 0:
        keep = drop_rng.random(n) >= faults.drop_prob
    jit = np.zeros(n, dtype=np.int64)
    if faults.timestamp_jitter_ms > 0:
        jit = jitter_rng.integers(
            -faults.timestamp_jitter_ms, faults.timestamp_jitter_ms + 1, size=n
        )
    out = []
    for i in range(n):
        if not keep[i]:
            continue
        t_new = max(0, transforms[i].t + faults.pairing_offset_ms + int(jit[i]))
        out.append(replace(transforms[i], t=t_new))
    out.sort(key=lambda tr: tr.t)
    return out


# --- config round-trip --------------------------------------------------------


def scenario_to_dict(sc: Scenario) -> dict:
    doc = {
        "kind": sc.kind,
        "duration_ms": sc.duration_ms,
        "geom": io.geometry_to_dict(sc.geom),
        "fixation_target_intrinsic": list(sc.fixation_target_intrinsic),
        "gaze_rate_hz": sc.gaze_rate_hz,
        "transform_rate_hz": sc.transform_rate_hz,
        "gaze_noise_sigma_px": sc.gaze_noise_sigma_px,
        "seed": sc.seed,
        "pid": sc.pid,
        "task": sc.task,
    }
    for k in ("pan_extent_px", "angular_speed_deg_s", "zoom_peak"):
        v = getattr(sc, k)
        if v is not None:
            doc[k] = v
    return doc


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        return Scenario(
            kind=doc["kind"],
            duration_ms=int(doc["duration_ms"]),
            geom=io.geometry_from_dict(doc["geom"]),
            fixation_target_intrinsic=tuple(float(v) for v in doc["fixation_target_intrinsic"]),
            gaze_rate_hz=float(doc.get("gaze_rate_hz", 30.0)),
            transform_rate_hz=float(doc.get("transform_rate_hz", 60.0)),
            gaze_noise_sigma_px=float(doc.get("gaze_noise_sigma_px", 0.0)),
            seed=int(doc.get("seed", 0)),
            pid=str(doc.get("pid", "sim")),
            task=str(doc.get("task", "")),
            pan_extent_px=None if "pan_extent_px" not in doc else float(doc["pan_extent_px"]),
            angular_speed_deg_s=(
                None if "angular_speed_deg_s" not in doc else float(doc["angular_speed_deg_s"])
            ),
            zoom_peak=None if "zoom_peak" not in doc else float(doc["zoom_peak"]),
        )
    except KeyError as e:
        raise SimulationError(f"scenario config missing field {e}") from e


def faults_to_dict(fm: FaultModel) -> dict:
    return {
        "timestamp_jitter_ms": fm.timestamp_jitter_ms,
        "drop_prob": fm.drop_prob,
        "pairing_offset_ms": fm.pairing_offset_ms,
        "drift_px_per_min": fm.drift_px_per_min,
    }


def faults_from_dict(doc: dict) -> FaultModel:
    return FaultModel(
        timestamp_jitter_ms=int(doc.get("timestamp_jitter_ms", 0)),
        drop_prob=float(doc.get("drop_prob", 0.0)),
        pairing_offset_ms=int(doc.get("pairing_offset_ms", 0)),
        drift_px_per_min=float(doc.get("drift_px_per_min", 0.0)),
    )


# --- persistence ----------------------------------------------------------------


def ground_truth_json_line(e: GroundTruthEntry) -> str:
    tr = e.transform
    return (
        '{"t":%d,"true_t":%d,"xi":%r,"yi":%r,"xn":%r,"yn":%r,'
        '"s":%r,"theta":%r,"tx":%r,"ty":%r}'
        % (
            e.t,
            e.true_t,
            float(e.target_intrinsic[0]),
            float(e.target_intrinsic[1]),
            float(e.screen_norm[0]),
            float(e.screen_norm[1]),
            float(tr.s),
            float(tr.theta),
            float(tr.tx),
            float(tr.ty),
        )
    )


def write_session_dir(
    session: SimulatedSession, out_dir: Union[str, Path], cfg: SyncConfig = SyncConfig()
) -> Path:
    """Persist generated streams in the ingest-service session layout."""
    sc = session.scenario
    d = io.session_dir(out_dir, sc.pid, sc.task)
    d.mkdir(parents=True, exist_ok=True)
    (d / io.SESSION_FILE).write_bytes(
        io.descriptor_bytes(sc.pid, sc.task, sc.geom, created_at=EPOCH_MS, status="open", cfg=cfg)
    )
    io.write_jsonl(d / io.GAZE_FILE, (io.gaze_json_line(g) for g in session.gaze))
    io.write_jsonl(d / io.TRANSFORM_FILE, (io.transform_json_line(t) for t in session.transforms))
    io.write_jsonl(d / io.EVENTS_FILE, (io.event_json_line(e) for e in session.events))
    io.write_jsonl(d / io.GROUND_TRUTH_FILE, (ground_truth_json_line(e) for e in session.ground_truth))
    return d


# --- service replay ---------------------------------------------------------


INTERLEAVINGS = ("sorted", "gaze-first", "transform-first", "seeded-shuffle")


@dataclass(frozen=True)
class ReplayResult:
    quality: dict
    combined_csv: bytes


def _http(method: str, url: str, body: Optional[dict | list] = None, timeout: float = 30.0):
    data = None if body is None else json.dumps(body).encode("utf-8")
    req = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        raise ServiceError(e.code, e.read().decode("utf-8", "replace")) from e
    except (urllib.error.URLError, socket.timeout, ConnectionError, OSError) as e:
        raise TransportError(f"cannot reach ingest service at {url}: {e}") from e


def _batches(items: Sequence, size: int) -> list[list]:
    return [list(items[i : i + size]) for i in range(0, len(items), size)]


def _interleave_batches(session: SimulatedSession, interleaving: str, batch_size: int):
    """Sequence of ('gaze'|'transform', payload_list) posts preserving
    per-stream timestamp order."""
    g_batches = [("gaze", b) for b in _batches(session.gaze, batch_size)]
    t_batches = [("transform", b) for b in _batches(session.transforms, batch_size)]
    if interleaving == "gaze-first":
        return g_batches + t_batches
    if interleaving == "transform-first":
        return t_batches + g_batches
    if interleaving == "sorted":
        # global timestamp order, regrouped into per-stream runs
        merged = sorted(
            [("gaze", g) for g in session.gaze] + [("transform", t) for t in session.transforms],
            key=lambda kv: kv[1].t,
        )
        out = []
        for stream, ev in merged:
            if out and out[-1][0] == stream and len(out[-1][1]) < batch_size:
                out[-1][1].append(ev)
            else:
                out.append((stream, [ev]))
        return out
    if interleaving == "seeded-shuffle":
        rng = np.random.default_rng(np.random.SeedSequence([session.scenario.seed, 0xC0FFEE]))
        slots = ["g"] * len(g_batches) + ["t"] * len(t_batches)
        rng.shuffle(slots)
        gi = ti = 0
        out = []
        for slot in slots:
            if slot == "g":
                out.append(g_batches[gi])
                gi += 1
            else:
                out.append(t_batches[ti])
                ti += 1
        return out
    raise SimulationError(f"unknown interleaving {interleaving!r}")


def replay_to_service(
    session: SimulatedSession,
    address: str,
    interleaving: str = "sorted",
    batch_size: int = 500,
) -> ReplayResult:
    """Open a session on the ingest service, post all events under the chosen
    interleaving, close it, and fetch the merged CSV.

    On transport failure partway through, a best-effort close is attempted so
    no session is left open."""
    sc = session.scenario
    base = address.rstrip("/")
    sess_url = f"{base}/v1/session"
    ev_base = f"{base}/v1/session/{sc.pid}/{sc.task}"

    _http(
        "POST",
        sess_url,
        {"pid": sc.pid, "task": sc.task, "geom": io.geometry_to_dict(sc.geom)},
    )
    try:
        for stream, events in _interleave_batches(session, interleaving, batch_size):
            if stream == "gaze":
                payload = [{"xn": g.xn, "yn": g.yn, "t": g.t} for g in events]
            else:
                payload = [
                    {"s": t.s, "theta": t.theta, "tx": t.tx, "ty": t.ty, "t": t.t} for t in events
                ]
            _http("POST", f"{ev_base}/{stream}", payload)
        for ev in session.events:
            _http("POST", f"{ev_base}/event", [{"kind": ev.kind, "t": ev.t}])
    except (TransportError, ServiceError):
        try:
            _http("POST", f"{ev_base}/close")
        except (TransportError, ServiceError):
            pass
        raise
    _, body = _http("POST", f"{ev_base}/close")
    quality = json.loads(body)
    _, csv_bytes = _http("GET", f"{ev_base}/combined")
    return ReplayResult(quality=quality, combined_csv=csv_bytes)
