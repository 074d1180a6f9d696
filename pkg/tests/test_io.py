import math

import numpy as np
import pytest

from gazealign import io
from gazealign.geometry import TransformState, ViewportGeometry
from gazealign.sync import CalibrationEvent, CombinedRecord, GazeSample, SyncConfig, quality

GEOM = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=2400, hi=4000)


def random_records(rng, n, pid="p1", task="t1"):
    ts = np.sort(rng.integers(0, 10**7, size=n))
    return [
        CombinedRecord(
            pid=pid,
            task=task,
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


class TestCombinedCsv:
    def test_single_record_is_two_lines(self):
        rec = CombinedRecord(pid="p1", task="t1", xn=0.5, yn=0.25, t=1000, s=1.0, theta=0.0, tx=0.0, ty=0.0)
        data = io.combined_csv_bytes([rec])
        lines = data.decode().split("\n")
        assert lines[0] == "pid,task,x,y,t,s,theta,tx,ty"
        assert lines[1] == "p1,t1,0.5,0.25,1000,1.0,0.0,0.0,0.0"
        assert data.endswith(b"\n") and len(lines) == 3  # trailing LF

    def test_theta_serializes_shortest_round_trip(self):
        rec = CombinedRecord(
            pid="p", task="t", xn=0.0, yn=0.0, t=0, s=1.0, theta=math.pi / 2, tx=0.0, ty=0.0
        )
        assert b"1.5707963267948966" in io.combined_csv_bytes([rec])

    def test_parse_inverts_export(self):
        rng = np.random.default_rng(7)
        records = random_records(rng, 200)
        assert io.parse_combined_csv(io.combined_csv_bytes(records)) == records

    def test_export_inverts_parse_byte_identically(self):
        rng = np.random.default_rng(8)
        data = io.combined_csv_bytes(random_records(rng, 100))
        assert io.combined_csv_bytes(io.parse_combined_csv(data)) == data

    def test_header_required(self):
        with pytest.raises(io.FormatError):
            io.parse_combined_csv(b"nonsense\n")

    def test_column_count_enforced(self):
        with pytest.raises(io.FormatError):
            io.parse_combined_csv(b"pid,task,x,y,t,s,theta,tx,ty\na,b,1,2,3\n")


class TestJsonl:
    def test_gaze_round_trip(self, tmp_path):
        samples = [
            GazeSample(pid="p1", task="t1", xn=0.125, yn=0.5, t=100),
            GazeSample(pid="p1", task="t1", xn=-0.1, yn=1.25, t=133),
        ]
        path = tmp_path / "gaze.jsonl"
        io.write_jsonl(path, (io.gaze_json_line(s) for s in samples))
        assert io.read_gaze_jsonl(path, "p1", "t1") == samples
        # byte identity on rewrite
        data = path.read_bytes()
        io.write_jsonl(path, (io.gaze_json_line(s) for s in io.read_gaze_jsonl(path, "p1", "t1")))
        assert path.read_bytes() == data

    def test_transform_round_trip(self, tmp_path):
        trs = [TransformState(s=2.0, theta=-0.5, tx=10.5, ty=-3.25, t=50)]
        path = tmp_path / "transform.jsonl"
        io.write_jsonl(path, (io.transform_json_line(t) for t in trs))
        assert io.read_transform_jsonl(path) == trs

    def test_event_round_trip(self, tmp_path):
        evs = [CalibrationEvent(pid="p1", task="t1", t=0, kind="initial")]
        path = tmp_path / "events.jsonl"
        io.write_jsonl(path, (io.event_json_line(e) for e in evs))
        assert io.read_events_jsonl(path, "p1", "t1") == evs

    def test_missing_file_reads_empty(self, tmp_path):
        assert io.read_events_jsonl(tmp_path / "nope.jsonl", "p", "t") == []

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "gaze.jsonl"
        path.write_text('{"xn":0.5,"yn":\n')
        with pytest.raises(io.FormatError):
            io.read_gaze_jsonl(path, "p", "t")

    def test_non_integer_timestamp_rejected(self, tmp_path):
        path = tmp_path / "gaze.jsonl"
        path.write_text('{"xn":0.5,"yn":0.5,"t":1.5}\n')
        with pytest.raises(io.FormatError):
            io.read_gaze_jsonl(path, "p", "t")


class TestDescriptorAndQuality:
    def test_descriptor_round_trip(self, tmp_path):
        path = tmp_path / io.SESSION_FILE
        path.write_bytes(
            io.descriptor_bytes("p1", "t1", GEOM, created_at=123, status="open", cfg=SyncConfig())
        )
        desc = io.read_descriptor(path)
        assert desc["pid"] == "p1" and desc["task"] == "t1"
        assert desc["geom"] == GEOM
        assert desc["delta_ms"] == 50

    def test_quality_json_deterministic(self):
        rep = quality([], [])
        assert io.quality_json_bytes(rep) == io.quality_json_bytes(rep)
        assert b'"matched_pct": 100.0' in io.quality_json_bytes(rep)

    def test_session_key_validation(self):
        with pytest.raises(io.FormatError):
            io.validate_session_key("p/1", "t")
        with pytest.raises(io.FormatError):
            io.validate_session_key("p", "")
        io.validate_session_key("p-1_x.2", "guided-line")

    def test_session_data_loads_all_streams(self, tmp_path):
        d = tmp_path / "p1" / "t1"
        d.mkdir(parents=True)
        (d / io.SESSION_FILE).write_bytes(
            io.descriptor_bytes("p1", "t1", GEOM, created_at=0, status="closed", cfg=SyncConfig())
        )
        io.write_jsonl(d / io.GAZE_FILE, [io.gaze_json_line(GazeSample("p1", "t1", 0.5, 0.5, 10))])
        io.write_jsonl(
            d / io.TRANSFORM_FILE,
            [io.transform_json_line(TransformState(s=1.0, theta=0.0, tx=0.0, ty=0.0, t=12))],
        )
        sess = io.SessionData(d)
        assert len(sess.gaze) == 1 and len(sess.transforms) == 1 and sess.events == []
        assert sess.geom == GEOM
        with pytest.raises(io.FormatError):
            sess.combined()
