import json

import pytest

from farmsentinel.config import load_config
from farmsentinel.errors import StartupError
from farmsentinel.pipeline import run_monitor

from conftest import stub_adapter_cmd, write_image
from test_audio import write_wav

SSD_REPLAY = """\
FRAME f02
DET f02 elephant 0.720000 0.300000 0.300000 0.700000 0.700000
END f02 140
FRAME f05
DET f05 boar 0.550000 0.100000 0.550000 0.350000 0.900000
END f05 130
FRAME f07
DET f07 monkey 0.610000 0.550000 0.150000 0.850000 0.500000
END f07 150
"""

YOLO_REPLAY = """\
FRAME f02
DET f02 elephant 0.880000 0.310000 0.290000 0.710000 0.690000
END f02 260
FRAME f04
DET f04 boar 0.920000 0.120000 0.560000 0.360000 0.910000
END f04 270
FRAME f05
DET f05 boar 0.900000 0.110000 0.550000 0.360000 0.900000
END f05 280
"""


def golden_setup(tmp_path, script=None, frames=12):
    """Config + fixtures for the deterministic 12-frame monitor scenario."""
    frames_dir = tmp_path / "frames"
    for i in range(1, frames + 1):
        write_image(frames_dir / f"f{i:02d}.png", size=(96, 72))
    (tmp_path / "ssd.replay").write_text(SSD_REPLAY)
    (tmp_path / "yolo.replay").write_text(YOLO_REPLAY)
    write_wav(tmp_path / "roar.wav")
    if script is None:
        script = [
            {"text": "deter", "after_alerts": 1},
            {"text": "stop", "after_polls": 10},
        ]
    doc = {
        "source": {"uri": "frames"},
        "detectors": [
            {"id": "ssd", "kind": "fixture_replay", "launch": "ssd.replay"},
            {"id": "yolo", "kind": "fixture_replay", "launch": "yolo.replay"},
        ],
        "fusion": {"allowed_classes": ["elephant", "boar", "monkey"]},
        "engine": {
            "alert_cooldown": 60.0,
            "absence_frames_to_clear": 5,
            "snapshot_dir": "out/snapshots",
        },
        "gateway": {"chat_id": 42, "mock_script": script},
        "deterrent": {"sound_path": "roar.wav"},
        "execution": {
            "clock": "simulated",
            "clock_start": 1000.0,
            "clock_step": 2.0,
            "action_log": "out/actions.jsonl",
        },
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(doc, indent=2))
    return config_path


def read_log(tmp_path):
    lines = (tmp_path / "out" / "actions.jsonl").read_text().splitlines()
    return [json.loads(line) for line in lines]


def actions_of(records, action_type):
    return [
        (rec, act)
        for rec in records
        for act in rec["actions"]
        if act["type"] == action_type
    ]


class TestGoldenRun:
    def test_run_is_deterministic_and_correct(self, tmp_path):
        exit_code = run_monitor(load_config(golden_setup(tmp_path)))
        assert exit_code == 0
        records = read_log(tmp_path)

        # 12 frames + deter + stop + shutdown
        assert [r["kind"] for r in records].count("frame") == 12
        assert [r["kind"] for r in records].count("command") == 2
        assert records[-1]["kind"] == "shutdown"

        alerts = actions_of(records, "send_alert")
        assert [a["classes"] for _, a in alerts] == [["elephant"], ["boar"], ["monkey"]]
        assert alerts[0][1]["confidences"] == {"elephant": 0.88}  # dedup kept yolo
        assert alerts[0][1]["snapshot"] == "snapshots/f02_alert.png"

        starts = actions_of(records, "start_deterrent")
        stops = actions_of(records, "stop_deterrent")
        assert len(starts) == 1 and len(stops) == 1
        assert starts[0][0]["input"] == "deter"
        assert stops[0][0]["input"] == "stop"

        # absence clearing returned the engine to IDLE by the last frame
        assert records[-2]["mode"] == "IDLE"
        assert records[-1]["actions"] == []

    def test_two_runs_byte_identical(self, tmp_path):
        log_a = tmp_path / "a"
        log_b = tmp_path / "b"
        for sub in (log_a, log_b):
            sub.mkdir()
            run_monitor(load_config(golden_setup(sub)))
        bytes_a = (log_a / "out" / "actions.jsonl").read_bytes()
        bytes_b = (log_b / "out" / "actions.jsonl").read_bytes()
        assert bytes_a == bytes_b

    def test_matches_checked_in_golden_log(self, tmp_path):
        from conftest import DATA_DIR

        run_monitor(load_config(golden_setup(tmp_path)))
        produced = (tmp_path / "out" / "actions.jsonl").read_bytes()
        assert produced == (DATA_DIR / "golden_actions.jsonl").read_bytes()

    def test_shutdown_during_deterring_records_stop(self, tmp_path):
        # no operator stop: the deterrent must be stopped by the shutdown path
        config = golden_setup(tmp_path, script=[{"text": "deter", "after_alerts": 1}])
        assert run_monitor(load_config(config)) == 0
        records = read_log(tmp_path)
        shutdown = records[-1]
        assert shutdown["kind"] == "shutdown"
        assert [a["type"] for a in shutdown["actions"]] == ["stop_deterrent"]
        starts = actions_of(records, "start_deterrent")
        stops = actions_of(records, "stop_deterrent")
        assert len(starts) == 1 and len(stops) == 1

    def test_alert_photos_reach_the_transport(self, tmp_path):
        from farmsentinel.pipeline import build_transport

        cfg = load_config(golden_setup(tmp_path))
        transport = build_transport(cfg)
        run_monitor(cfg, transport=transport)
        assert len(transport.photos) == 3
        assert transport.photos[0]["caption"].startswith("Elephant detected (88%)")
        assert all(p["chat_id"] == 42 for p in transport.photos)


class TestDegradedRuns:
    def test_both_detectors_permanently_faulted_aborts(self, tmp_path):
        config_path = golden_setup(tmp_path, script=[])
        doc = json.loads(config_path.read_text())
        cmd = stub_adapter_cmd(tmp_path, mode="garbage")
        doc["detectors"] = [
            {"id": "a", "kind": "external_process", "launch": cmd, "infer_timeout": 2},
            {"id": "b", "kind": "external_process", "launch": cmd, "infer_timeout": 2},
        ]
        config_path.write_text(json.dumps(doc))
        from farmsentinel.pipeline import build_transport

        cfg = load_config(config_path)
        transport = build_transport(cfg)
        exit_code = run_monitor(cfg, transport=transport, detector_sleep=lambda _: None)
        assert exit_code == 4
        assert any("All detectors failed" in m["text"] for m in transport.messages)

    def test_single_faulted_detector_runs_degraded(self, tmp_path):
        config_path = golden_setup(tmp_path, script=[])
        doc = json.loads(config_path.read_text())
        doc["detectors"][0] = {
            "id": "flappy",
            "kind": "external_process",
            "launch": stub_adapter_cmd(tmp_path, mode="garbage"),
            "infer_timeout": 2,
        }
        config_path.write_text(json.dumps(doc))
        from farmsentinel.pipeline import build_transport

        cfg = load_config(config_path)
        transport = build_transport(cfg)
        exit_code = run_monitor(cfg, transport=transport, detector_sleep=lambda _: None)
        assert exit_code == 0  # yolo survived; run completed
        records = read_log(tmp_path)
        # yolo's detections still produced alerts
        assert actions_of(records, "send_alert")
        assert any("running degraded" in m["text"] for m in transport.messages)

    def test_detector_startup_failure_raises(self, tmp_path):
        config_path = golden_setup(tmp_path)
        doc = json.loads(config_path.read_text())
        doc["detectors"][0]["launch"] = "missing.replay"
        config_path.write_text(json.dumps(doc))
        with pytest.raises(StartupError):
            run_monitor(load_config(config_path))
