"""Local HTTP/JSON logging server for gaze and transform streams.

Endpoints (JSON bodies; event endpoints take arrays so 30-60 Hz streams can
batch):

    POST /v1/session                              open {pid, task, geom{...}}
    POST /v1/session/{pid}/{task}/gaze            [{xn, yn, t}, ...]
    POST /v1/session/{pid}/{task}/transform       [{s, theta, tx, ty, t}, ...]
    POST /v1/session/{pid}/{task}/event           [{kind, t}, ...]
    POST /v1/session/{pid}/{task}/close           -> quality report
    GET  /v1/session/{pid}/{task}/combined        -> merged CSV
    GET  /v1/healthz

Each session owns a directory under data_dir (raw JSONL streams appended as
requests arrive; combined.csv and quality.json written on close). A request
batch is validated in full before any of it is applied, so a malformed body
never counts events. Events for one session are serialized under its lock;
different sessions proceed in parallel. No image or sensor payloads exist
anywhere in the schema. After a storage failure the service refuses further
writes and reports a degraded health status.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Union

from . import io
from .geometry import GeometryError, ViewportGeometry
from .sync import SessionBuffer, SessionClosedError, SyncConfig, SyncError, quality


class _HTTPFail(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class _Session:
    def __init__(self, pid: str, task: str, geom: ViewportGeometry, directory: Path, cfg: SyncConfig):
        self.pid = pid
        self.task = task
        self.geom = geom
        self.dir = directory
        self.cfg = cfg
        self.created_at = int(time.time() * 1000)
        self.buffer = SessionBuffer(pid, task, cfg)
        self.records = []
        self.lock = threading.Lock()

    @property
    def closed(self) -> bool:
        return self.buffer.closed


class IngestState:
    """Registry plus storage root shared by all request threads."""

    def __init__(self, data_dir: Union[str, Path], cfg: SyncConfig = SyncConfig()):
        self.data_dir = Path(data_dir)
        self.cfg = cfg
        self.sessions: dict[tuple[str, str], _Session] = {}
        self.lock = threading.Lock()
        self.healthy = True
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def open_session(self, pid: str, task: str, geom: ViewportGeometry) -> _Session:
        try:
            directory = io.session_dir(self.data_dir, pid, task)
        except io.FormatError as e:
            raise _HTTPFail(400, str(e))
        with self.lock:
            if (pid, task) in self.sessions:
                raise _HTTPFail(409, f"session {pid}/{task} already exists")
            if directory.exists():
                raise _HTTPFail(409, f"session directory {directory} already exists on disk")
            sess = _Session(pid, task, geom, directory, self.cfg)
            self.sessions[(pid, task)] = sess
        try:
            self._store(sess, io.SESSION_FILE, self._descriptor(sess, "open"))
        except _HTTPFail:
            with self.lock:
                self.sessions.pop((pid, task), None)
            raise
        return sess

    def get(self, pid: str, task: str) -> _Session:
        with self.lock:
            sess = self.sessions.get((pid, task))
        if sess is None:
            raise _HTTPFail(404, f"unknown session {pid}/{task}")
        return sess

    def _descriptor(self, sess: _Session, status: str) -> bytes:
        return io.descriptor_bytes(
            sess.pid, sess.task, sess.geom, created_at=sess.created_at, status=status, cfg=sess.cfg
        )

    def _store(self, sess: _Session, name: str, data: bytes, append: bool = False) -> None:
        if not self.healthy:
            raise _HTTPFail(503, "storage failed earlier; service refuses writes")
        try:
            sess.dir.mkdir(parents=True, exist_ok=True)
            path = sess.dir / name
            if append:
                with open(path, "ab") as fh:
                    fh.write(data)
            else:
                path.write_bytes(data)
        except OSError as e:
            self.healthy = False
            raise _HTTPFail(503, f"storage failure: {e}")

    def apply_events(self, sess: _Session, stream: str, payload) -> dict:
        if not isinstance(payload, list):
            raise _HTTPFail(400, f"{stream} endpoint expects a JSON array of events")
        # validate the whole batch before applying any of it
        try:
            if stream == "gaze":
                events = [io.parse_gaze_obj(_require_obj(o), sess.pid, sess.task) for o in payload]
                lines = [io.gaze_json_line(e) for e in events]
                fname = io.GAZE_FILE
                quarantine = sess.buffer.quarantined_gaze
            elif stream == "transform":
                events = [io.parse_transform_obj(_require_obj(o)) for o in payload]
                lines = [io.transform_json_line(e) for e in events]
                fname = io.TRANSFORM_FILE
                quarantine = sess.buffer.quarantined_transforms
            else:
                events = [io.parse_event_obj(_require_obj(o), sess.pid, sess.task) for o in payload]
                lines = [io.event_json_line(e) for e in events]
                fname = io.EVENTS_FILE
                quarantine = sess.buffer.quarantined_events
        except (io.FormatError, SyncError, GeometryError) as e:
            raise _HTTPFail(400, str(e))

        with sess.lock:
            if sess.closed:
                raise _HTTPFail(409, f"session {sess.pid}/{sess.task} is closed")
            accepted_lines = []
            quarantined = 0
            for ev, line in zip(events, lines):
                before = len(quarantine)
                sess.records.extend(sess.buffer.ingest(ev))
                if len(quarantine) == before:
                    accepted_lines.append(line)
                else:
                    quarantined += 1
            if accepted_lines:
                self._store(sess, fname, ("".join(ln + "\n" for ln in accepted_lines)).encode(), append=True)
        return {"accepted": len(accepted_lines), "quarantined": quarantined}

    def close_session(self, sess: _Session) -> dict:
        with sess.lock:
            try:
                sess.records.extend(sess.buffer.close())
            except SessionClosedError as e:
                raise _HTTPFail(409, str(e))
            report = quality(
                sess.records,
                sess.buffer.discarded,
                sess.buffer.calibration_events,
                quarantined_gaze=len(sess.buffer.quarantined_gaze),
                quarantined_transforms=len(sess.buffer.quarantined_transforms),
            )
            self._store(sess, io.COMBINED_FILE, io.combined_csv_bytes(sess.records))
            self._store(sess, io.QUALITY_FILE, io.quality_json_bytes(report))
            self._store(sess, io.SESSION_FILE, self._descriptor(sess, "closed"))
        return report.to_dict()

    def combined_csv(self, sess: _Session) -> bytes:
        with sess.lock:
            if not sess.closed:
                raise _HTTPFail(409, f"session {sess.pid}/{sess.task} is still open")
        try:
            return (sess.dir / io.COMBINED_FILE).read_bytes()
        except OSError as e:
            raise _HTTPFail(503, f"storage failure: {e}")


def _require_obj(o) -> dict:
    if not isinstance(o, dict):
        raise io.FormatError(f"expected JSON object, got {o!r}")
    return o


class IngestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "gazealign-ingest/0.1"

    @property
    def state(self) -> IngestState:
        return self.server.state  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    # -- plumbing

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise _HTTPFail(400, "empty request body")
        try:
            return json.loads(raw)
        except json.JSONDecodeError as e:
            raise _HTTPFail(400, f"malformed JSON body: {e}")

    def _reply(self, status: int, payload: dict) -> None:
        self._reply_bytes(status, "application/json", (json.dumps(payload) + "\n").encode())

    def _reply_bytes(self, status: int, ctype: str, data: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _session_route(self, parts: list[str]) -> tuple:
        # parts like ["v1", "session", pid, task, action]
        if len(parts) != 5:
            raise _HTTPFail(404, f"no such path: {self.path}")
        return self.state.get(parts[2], parts[3]), parts[4]

    # -- verbs

    def do_POST(self):
        try:
            parts = [p for p in self.path.split("/") if p]
            if parts == ["v1", "session"]:
                body = self._body()
                if not isinstance(body, dict):
                    raise _HTTPFail(400, "session open expects a JSON object")
                pid, task = body.get("pid"), body.get("task")
                if not isinstance(pid, str) or not isinstance(task, str):
                    raise _HTTPFail(400, "pid and task must be strings")
                try:
                    geom = io.geometry_from_dict(body.get("geom") or {})
                except (io.FormatError, GeometryError) as e:
                    raise _HTTPFail(400, str(e))
                self.state.open_session(pid, task, geom)
                self._reply(200, {"pid": pid, "task": task, "status": "open"})
                return
            sess, action = self._session_route(parts)
            if action in ("gaze", "transform", "event"):
                self._reply(200, self.state.apply_events(sess, action, self._body()))
            elif action == "close":
                self._reply(200, self.state.close_session(sess))
            else:
                raise _HTTPFail(404, f"no such action: {action}")
        except _HTTPFail as e:
            self._reply(e.status, {"error": e.message})

    def do_GET(self):
        try:
            parts = [p for p in self.path.split("/") if p]
            if parts == ["v1", "healthz"]:
                status = "ok" if self.state.healthy else "degraded"
                self._reply(200 if self.state.healthy else 503, {"status": status})
                return
            sess, action = self._session_route(parts)
            if action == "combined":
                self._reply_bytes(200, "text/csv; charset=utf-8", self.state.combined_csv(sess))
            else:
                raise _HTTPFail(404, f"no such action: {action}")
        except _HTTPFail as e:
            self._reply(e.status, {"error": e.message})


class IngestServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, bind: tuple[str, int], state: IngestState, verbose: bool = False):
        super().__init__(bind, IngestHandler)
        self.state = state
        self.verbose = verbose

    @property
    def address(self) -> str:
        host, port = self.server_address[0], self.server_address[1]
        return f"http://{host}:{port}"


def start_server(
    bind: str = "127.0.0.1:0",
    data_dir: Union[str, Path] = "sessions",
    cfg: SyncConfig = SyncConfig(),
    verbose: bool = False,
) -> tuple[IngestServer, threading.Thread]:
    """Start the service on a background thread; server.address gives the URL."""
    host, _, port = bind.partition(":")
    server = IngestServer((host or "127.0.0.1", int(port or 0)), IngestState(data_dir, cfg), verbose)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    return server, thread


def serve(
    bind: str,
    data_dir: Union[str, Path],
    cfg: SyncConfig = SyncConfig(),
    verbose: bool = True,
) -> None:
    """Run the ingest service until interrupted."""
    host, _, port = bind.partition(":")
    server = IngestServer((host or "127.0.0.1", int(port or 8077)), IngestState(data_dir, cfg), verbose)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
