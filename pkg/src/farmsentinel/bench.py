"""Latency benchmarking: wall-clock per-frame inference time per model and
for the fused pipeline in both execution modes.

Two passes over the dataset: a sequential pass times each detector
individually (their sum is the sequential pipeline figure) and a parallel
pass times both detectors running concurrently (the pipeline figure is the
slower of the two plus join overhead). Results group by the frame's ground
truth class.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

from .config import AppConfig
from .dataset import load_dataset
from .detectors import SupervisedDetector
from .metrics import LatencyStats, latency_stats
from .reporting import write_bench_report

MIXED = "mixed"
UNLABELLED = "unlabelled"


def _group_of(item) -> str:
    classes = {t.label for t in item.truths}
    if not classes:
        return UNLABELLED
    if len(classes) > 1:
        return MIXED
    return next(iter(classes))


def _stats_by_group(samples: dict[str, list[float]]) -> dict[str, LatencyStats]:
    out = {}
    merged = [v for values in samples.values() for v in values]
    for group, values in samples.items():
        out[group] = latency_stats(values)
    if merged:
        out["all"] = latency_stats(merged)
    return out


def run_bench(
    cfg: AppConfig, dataset_path, detector_sleep=time.sleep
) -> tuple[dict, tuple]:
    dataset = load_dataset(dataset_path)
    detectors = [
        SupervisedDetector(spec=spec, sleep=detector_sleep).start()
        for spec in cfg.detectors
    ]
    per_model: dict[str, dict[str, list[float]]] = {
        d.spec.id: {} for d in detectors
    }
    sequential: dict[str, list[float]] = {}
    parallel: dict[str, list[float]] = {}

    try:
        for item in dataset.items:
            group = _group_of(item)
            frame_total = 0.0
            for detector in detectors:
                started = time.perf_counter()
                detector.safe_infer(item.frame_id, item.image_path)
                elapsed = (time.perf_counter() - started) * 1000.0
                per_model[detector.spec.id].setdefault(group, []).append(elapsed)
                frame_total += elapsed
            sequential.setdefault(group, []).append(frame_total)

        with ThreadPoolExecutor(max_workers=len(detectors)) as pool:
            for item in dataset.items:
                group = _group_of(item)
                started = time.perf_counter()
                futures = [
                    pool.submit(d.safe_infer, item.frame_id, item.image_path)
                    for d in detectors
                ]
                for future in futures:
                    future.result()
                parallel.setdefault(group, []).append(
                    (time.perf_counter() - started) * 1000.0
                )
    finally:
        for detector in detectors:
            detector.stop()

    bench = {model: _stats_by_group(samples) for model, samples in per_model.items()}
    bench["pipeline_sequential"] = _stats_by_group(sequential)
    bench["pipeline_parallel"] = _stats_by_group(parallel)
    paths = write_bench_report(bench, cfg.evaluation.report_dir)
    return bench, paths
