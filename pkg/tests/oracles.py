"""Independent brute-force oracles the fast implementations are checked against.

These deliberately take different routes than the production code: counting
rasterized grid cells instead of closed-form areas, repeated exhaustive
candidate enumeration instead of a single sorted pass, and full re-matching
plus numerical envelope integration instead of cumulative counts.
"""

from __future__ import annotations

import numpy as np

from farmsentinel.geometry import BBox, Detection, iou
from farmsentinel.metrics import GroundTruthBox, MatchOutcome


def raster_mask(b: BBox, resolution: int) -> np.ndarray:
    """Boolean grid of cells whose center falls inside the box."""
    centers = (np.arange(resolution) + 0.5) / resolution
    in_x = (centers >= b.x_min) & (centers < b.x_max)
    in_y = (centers >= b.y_min) & (centers < b.y_max)
    return np.outer(in_y, in_x)


def raster_area(b: BBox, resolution: int = 1000) -> float:
    return raster_mask(b, resolution).sum() / (resolution * resolution)


def raster_iou(a: BBox, b: BBox, resolution: int = 1000) -> float:
    mask_a = raster_mask(a, resolution)
    mask_b = raster_mask(b, resolution)
    union = np.logical_or(mask_a, mask_b).sum()
    if union == 0:
        return 0.0
    inter = np.logical_and(mask_a, mask_b).sum()
    return float(inter) / float(union)


def exhaustive_greedy_match(
    preds: list[Detection],
    truths: list[GroundTruthBox],
    iou_thresh: float,
) -> dict[str, MatchOutcome]:
    """Greedy one-to-one matching by repeated exhaustive candidate enumeration.

    Every round re-enumerates all remaining (prediction, truth) pairs, then
    applies the rule declaratively: strongest prediction first (ties by input
    order), its highest-IoU admissible truth (ties by lowest index).
    """
    free_preds = list(range(len(preds)))
    free_truths = list(range(len(truths)))
    matched_preds: set[int] = set()
    matched_truths: set[int] = set()

    while True:
        candidates = [
            (i, j, iou(preds[i].bbox, truths[j].bbox))
            for i in free_preds
            for j in free_truths
            if preds[i].label == truths[j].label
            and iou(preds[i].bbox, truths[j].bbox) >= iou_thresh
        ]
        if not candidates:
            break
        top_conf = max(preds[i].confidence for i, _, _ in candidates)
        i_star = min(i for i, _, _ in candidates if preds[i].confidence == top_conf)
        own = [(j, ov) for i, j, ov in candidates if i == i_star]
        best_overlap = max(ov for _, ov in own)
        j_star = min(j for j, ov in own if ov == best_overlap)
        matched_preds.add(i_star)
        matched_truths.add(j_star)
        free_preds.remove(i_star)
        free_truths.remove(j_star)

    out: dict[str, MatchOutcome] = {}
    for i, pred in enumerate(preds):
        prev = out.get(pred.label, MatchOutcome())
        if i in matched_preds:
            out[pred.label] = prev + MatchOutcome(tp=1)
        else:
            out[pred.label] = prev + MatchOutcome(fp=1)
    for j, truth in enumerate(truths):
        if j not in matched_truths:
            prev = out.get(truth.label, MatchOutcome())
            out[truth.label] = prev + MatchOutcome(fn=1)
    return out


def sweep_ap_oracle(
    preds: list[Detection],
    truths: list[GroundTruthBox],
    iou_thresh: float,
    recall_step: float = 1e-4,
) -> float:
    """AP by full re-matching at every distinct confidence plus numerical
    integration of the precision envelope over a recall grid.

    The grid is refined with the observed recall breakpoints so the piecewise
    constant envelope integrates exactly.
    """
    if not truths:
        raise ValueError("oracle AP undefined without ground truths")
    n_truths = len(truths)

    by_frame: dict[str, tuple[list[Detection], list[GroundTruthBox]]] = {}
    for t in truths:
        by_frame.setdefault(t.frame_id, ([], []))[1].append(t)
    for p in preds:
        by_frame.setdefault(p.frame_id, ([], []))[0].append(p)

    pr_points: list[tuple[float, float]] = []
    for cut in sorted({p.confidence for p in preds}, reverse=True):
        tp = fp = 0
        n_kept = 0
        for frame_preds, frame_truths in by_frame.values():
            kept = [p for p in frame_preds if p.confidence >= cut]
            n_kept += len(kept)
            outcome = exhaustive_greedy_match(kept, frame_truths, iou_thresh)
            tp += sum(m.tp for m in outcome.values())
        fp = n_kept - tp
        pr_points.append((tp / (tp + fp), tp / n_truths))
    if not pr_points:
        return 0.0

    recalls = np.array(sorted(r for _, r in pr_points))
    # suffix max of precision over points ordered by recall
    ordered = sorted(pr_points, key=lambda pr: pr[1])
    suffix = np.array([p for p, _ in ordered])
    for k in range(len(suffix) - 2, -1, -1):
        suffix[k] = max(suffix[k], suffix[k + 1])
    point_recalls = np.array([r for _, r in ordered])

    grid = np.unique(
        np.concatenate([np.arange(0.0, 1.0 + recall_step, recall_step), recalls])
    )
    grid = np.clip(grid, 0.0, 1.0)
    mids = (grid[:-1] + grid[1:]) / 2.0
    widths = np.diff(grid)
    idx = np.searchsorted(point_recalls, mids, side="left")
    env = np.where(idx < len(suffix), suffix[np.minimum(idx, len(suffix) - 1)], 0.0)
    return float(np.sum(widths * env))
