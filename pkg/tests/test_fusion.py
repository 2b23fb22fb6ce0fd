import random

import pytest

from farmsentinel.errors import ConfigError
from farmsentinel.fusion import FusionConfig, filter_detections, fuse
from farmsentinel.geometry import BBox

from conftest import CLASSES, det, random_box

CFG = FusionConfig(allowed_classes=frozenset(CLASSES), source_order=("ssd", "yolo"))

B = BBox(0.2, 0.2, 0.6, 0.6)


def random_detections(rng, n, frame="f1", source=None):
    out = []
    for _ in range(n):
        out.append(
            det(
                random_box(rng),
                label=rng.choice(CLASSES + ("person", "dog")),
                conf=round(rng.random(), 3),
                source=source or rng.choice(("ssd", "yolo")),
                frame=frame,
            )
        )
    return out


class TestFilter:
    def test_drops_class_outside_allow_list(self):
        raw = [det(B, "boar", 0.80), det(B, "person", 0.99)]
        kept = filter_detections(raw, CFG)
        assert [(d.label, d.confidence) for d in kept] == [("boar", 0.80)]

    def test_empty_input(self):
        assert filter_detections([], CFG) == []

    def test_threshold_is_inclusive(self):
        raw = [det(B, "monkey", 0.50), det(B, "monkey", 0.49)]
        kept = filter_detections(raw, CFG)
        assert [d.confidence for d in kept] == [0.50]

    def test_idempotent(self, rng):
        for _ in range(200):
            raw = random_detections(rng, rng.randint(0, 8))
            once = filter_detections(raw, CFG)
            assert filter_detections(once, CFG) == once

    def test_raising_threshold_never_adds_detections(self, rng):
        for _ in range(200):
            raw = random_detections(rng, rng.randint(0, 8))
            lo = FusionConfig(allowed_classes=frozenset(CLASSES), conf_threshold=0.3)
            hi = FusionConfig(allowed_classes=frozenset(CLASSES), conf_threshold=0.7)
            assert len(filter_detections(raw, hi)) <= len(filter_detections(raw, lo))


class TestFuse:
    def test_cross_model_duplicate_keeps_higher_confidence(self):
        a = [det(B, "elephant", 0.7, source="ssd")]
        b = [det(B, "elephant", 0.9, source="yolo")]
        fused = fuse(a, b, CFG)
        assert len(fused.detections) == 1
        assert fused.detections[0].confidence == 0.9
        assert fused.detections[0].source == "yolo"
        assert fused.detected_classes == {"elephant"}

    def test_union_with_empty_side(self):
        fused = fuse([], [det(B, "boar", 0.92, source="yolo")], CFG)
        assert [d.confidence for d in fused.detections] == [0.92]
        assert fused.detected_classes == {"boar"}

    def test_different_labels_never_dedup(self):
        left = det(BBox(0.1, 0.1, 0.4, 0.4), "boar", 0.6, source="ssd")
        right = det(BBox(0.5, 0.5, 0.9, 0.9), "monkey", 0.8, source="yolo")
        fused = fuse([left], [right], CFG)
        assert len(fused.detections) == 2
        assert fused.detected_classes == {"boar", "monkey"}

    def test_equal_confidence_tie_keeps_first_configured_source(self):
        a = [det(B, "elephant", 0.8, source="ssd")]
        b = [det(B, "elephant", 0.8, source="yolo")]
        fused = fuse(a, b, CFG)
        assert [d.source for d in fused.detections] == ["ssd"]
        # and the same winner regardless of argument order
        fused_rev = fuse(b, a, CFG)
        assert [d.source for d in fused_rev.detections] == ["ssd"]

    def test_mismatched_frame_ids_is_a_caller_bug(self):
        a = [det(B, "boar", 0.9, frame="f1")]
        b = [det(B, "boar", 0.9, frame="f2")]
        with pytest.raises(ValueError):
            fuse(a, b, CFG)

    def test_same_source_pairs_never_dedup(self):
        # within-model suppression is the backend's job
        a = [det(B, "boar", 0.9, source="yolo"), det(B, "boar", 0.8, source="yolo")]
        fused = fuse(a, [], CFG)
        assert len(fused.detections) == 2

    def test_explicit_frame_id_used_when_inputs_empty(self):
        fused = fuse([], [], CFG, frame_id="f42")
        assert fused.frame_id == "f42"
        assert fused.detections == ()


class TestFuseProperties:
    def test_randomized_conformance(self):
        rng = random.Random(20_26)
        for _ in range(1000):
            frame = "fx"
            a = random_detections(rng, rng.randint(0, 6), frame, source="ssd")
            b = random_detections(rng, rng.randint(0, 6), frame, source="yolo")
            thresh = rng.choice((0.0, 0.3, 0.5, 0.8))
            cfg = FusionConfig(
                allowed_classes=frozenset(CLASSES),
                conf_threshold=thresh,
                dedup_iou=rng.choice((0.3, 0.5, 0.9)),
                source_order=("ssd", "yolo"),
            )
            cfg_off = FusionConfig(
                allowed_classes=cfg.allowed_classes,
                conf_threshold=thresh,
                dedup_enabled=False,
                source_order=cfg.source_order,
            )
            fused = fuse(a, b, cfg, frame_id=frame)

            # no invented detections
            pool = set(a) | set(b)
            assert all(d in pool for d in fused.detections)

            # detected_classes is exactly the survivors' label set
            assert fused.detected_classes == {d.label for d in fused.detections}

            # every survivor passes the filter
            assert all(
                d.confidence >= thresh and d.label in cfg.allowed_classes
                for d in fused.detections
            )

            # class-set symmetry
            assert fuse(b, a, cfg, frame_id=frame).detected_classes == fused.detected_classes

            # dedup off: plain union cardinality
            assert len(fuse(a, b, cfg_off, frame_id=frame).detections) == len(
                filter_detections(a, cfg_off)
            ) + len(filter_detections(b, cfg_off))

            # threshold monotonicity
            tighter = FusionConfig(
                allowed_classes=cfg.allowed_classes,
                conf_threshold=min(1.0, thresh + 0.2),
                dedup_iou=cfg.dedup_iou,
                source_order=cfg.source_order,
            )
            assert len(fuse(a, b, tighter, frame_id=frame).detections) <= len(
                fused.detections
            )


class TestFusionConfig:
    def test_rejects_empty_allow_list(self):
        with pytest.raises(ConfigError):
            FusionConfig(allowed_classes=frozenset())

    def test_rejects_out_of_range_threshold(self):
        with pytest.raises(ConfigError):
            FusionConfig(allowed_classes=frozenset({"boar"}), conf_threshold=1.2)
        with pytest.raises(ConfigError):
            FusionConfig(allowed_classes=frozenset({"boar"}), dedup_iou=-0.1)

    def test_labels_canonicalized(self):
        cfg = FusionConfig(allowed_classes=frozenset({"Boar", "ELEPHANT"}))
        assert cfg.allowed_classes == {"boar", "elephant"}
