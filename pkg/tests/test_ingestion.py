import pytest

from farmsentinel.errors import ConfigError, StartupError
from farmsentinel.ingestion import (
    SourceConfig,
    SpoolManager,
    open_source,
    next_frame,
)

from conftest import write_image

cv2 = pytest.importorskip("cv2", reason="video tests need OpenCV")


def make_frames_dir(root, count, prefix="frame"):
    for i in range(count):
        write_image(root / f"{prefix}{i:02d}.png")
    return root


class TestDirectorySource:
    def test_lexicographic_order_and_end_of_stream(self, tmp_path):
        make_frames_dir(tmp_path, 5)
        stream = open_source(SourceConfig(uri=str(tmp_path)))
        ids = []
        while (rec := next_frame(stream)) is not None:
            ids.append(rec.frame_id)
        assert ids == [f"frame{i:02d}" for i in range(5)]
        assert next_frame(stream) is None

    def test_sampling_every_nth(self, tmp_path):
        make_frames_dir(tmp_path, 10)
        stream = open_source(SourceConfig(uri=str(tmp_path), sample_every_n=3))
        ids = []
        while (rec := next_frame(stream)) is not None:
            ids.append(rec.frame_id)
        assert ids == ["frame00", "frame03", "frame06", "frame09"]

    def test_no_duplicates_and_order_preserved(self, tmp_path):
        make_frames_dir(tmp_path, 30)
        stream = open_source(SourceConfig(uri=str(tmp_path), sample_every_n=4))
        ids = [rec.frame_id for rec in iter(lambda: next_frame(stream), None)]
        assert ids == sorted(set(ids))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(StartupError):
            open_source(SourceConfig(uri=str(tmp_path / "nope"), kind="image_dir"))

    def test_injected_clock_stamps_frames(self, tmp_path):
        make_frames_dir(tmp_path, 2)
        ticks = iter([100.0, 105.0])
        stream = open_source(SourceConfig(uri=str(tmp_path)), clock=lambda: next(ticks))
        assert next_frame(stream).timestamp == 100.0
        assert next_frame(stream).timestamp == 105.0


class TestSourceConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            SourceConfig(uri="x", sample_every_n=0)
        with pytest.raises(ConfigError):
            SourceConfig(uri="x", spool_cap=0)
        with pytest.raises(ConfigError):
            SourceConfig(uri="x", kind="hologram")

    def test_kind_inference(self, tmp_path):
        assert SourceConfig(uri=str(tmp_path)).resolved_kind() == "image_dir"
        assert SourceConfig(uri="camera:0").resolved_kind() == "camera"
        assert SourceConfig(uri="clip.mp4").resolved_kind() == "video_file"


class TestSpool:
    def test_evicts_oldest_unreferenced_beyond_cap(self, tmp_path):
        spool = SpoolManager(tmp_path / "spool", cap=5)
        paths = []
        for i in range(1, 7):
            path = spool.add(f"f{i}")
            path.write_bytes(b"jpg")
            paths.append(path)
            spool.release(f"f{i}")
        assert not paths[0].exists()  # frame 1 evicted when the 6th arrived
        assert all(p.exists() for p in paths[1:])

    def test_referenced_frames_survive_eviction(self, tmp_path):
        spool = SpoolManager(tmp_path / "spool", cap=2)
        first = spool.add("f1")
        first.write_bytes(b"jpg")
        for i in range(2, 6):
            spool.add(f"f{i}").write_bytes(b"jpg")
            spool.release(f"f{i}")
        assert first.exists()  # still in flight, never evicted
        spool.release("f1")
        spool.add("f6").write_bytes(b"jpg")
        assert not first.exists()


class TestVideoSource:
    @pytest.fixture
    def video_path(self, tmp_path):
        import numpy as np

        path = tmp_path / "clip.avi"
        writer = cv2.VideoWriter(
            str(path), cv2.VideoWriter_fourcc(*"MJPG"), 10, (64, 48)
        )
        for i in range(25):
            frame = np.full((48, 64, 3), i * 10 % 255, dtype=np.uint8)
            writer.write(frame)
        writer.release()
        if not path.exists():
            pytest.skip("OpenCV build cannot encode test video")
        return path

    def test_sampling_yields_every_nth_frame(self, tmp_path, video_path):
        cfg = SourceConfig(
            uri=str(video_path),
            sample_every_n=10,
            spool_dir=str(tmp_path / "spool"),
        )
        stream = open_source(cfg)
        ids = [rec.frame_id for rec in iter(lambda: next_frame(stream), None)]
        stream.close()
        assert ids == ["f000000", "f000010", "f000020"]

    def test_frames_materialized_to_spool(self, tmp_path, video_path):
        cfg = SourceConfig(
            uri=str(video_path), spool_dir=str(tmp_path / "spool"), spool_cap=3
        )
        stream = open_source(cfg)
        rec = next_frame(stream)
        assert rec.image_path.exists()
        assert rec.image_path.parent == tmp_path / "spool"
        stream.close()

    def test_missing_video_file(self, tmp_path):
        with pytest.raises(StartupError):
            open_source(SourceConfig(uri=str(tmp_path / "nope.mp4"), kind="video_file"))
