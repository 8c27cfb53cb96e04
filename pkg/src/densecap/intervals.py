"""Temporal IoU, proposal-groundtruth matching and precision/recall tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import Corpus, TimeInterval


@dataclass(frozen=True)
class MatchResult:
    pred_index: int
    gt_index: Optional[int]
    tiou: float


@dataclass
class PRTable:
    """Per-threshold precision/recall averaged over videos."""

    thresholds: List[float]
    precision: Dict[float, float]
    recall: Dict[float, float]
    avg_proposals_per_video: float
    videos: int = 0
    zero_prediction_videos: int = 0

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(t, self.precision[t], self.recall[t]) for t in self.thresholds]


def tiou(a: TimeInterval, b: TimeInterval) -> float:
    """Temporal intersection-over-union of two intervals, in [0, 1]."""
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    if inter <= 0:
        return 0.0
    union = max(a.end_s, b.end_s) - min(a.start_s, b.start_s)
    return inter / union


def best_match(pred: TimeInterval, gts: Sequence[TimeInterval]) -> Tuple[int, float]:
    """Index and tIoU of the groundtruth best matching `pred`.

    Ties break toward the smaller index.
    """
    if not gts:
        raise ValueError("best_match needs a non-empty groundtruth list")
    best_i, best_v = 0, -1.0
    for i, gt in enumerate(gts):
        v = tiou(pred, gt)
        if v > best_v:
            best_i, best_v = i, v
    return best_i, best_v


def match_all(preds: Sequence[TimeInterval],
              gts: Sequence[TimeInterval]) -> List[MatchResult]:
    """Independent best match per prediction (no one-to-one assignment)."""
    out = []
    for p_idx, pred in enumerate(preds):
        gt_idx, v = best_match(pred, gts)
        out.append(MatchResult(p_idx, gt_idx if v > 0 else None, v))
    return out


def video_precision_recall(preds: Sequence[TimeInterval],
                           gt_union: Sequence[TimeInterval],
                           thresholds: Sequence[float]):
    """Raw hit counts for one video.

    Returns ({t: predictions with max tIoU >= t}, {t: groundtruths with max
    tIoU >= t}). Each side matches independently against the other, which is
    the challenge evaluator's convention.
    """
    pred_best = [best_match(p, gt_union)[1] if gt_union else 0.0 for p in preds]
    gt_best = [best_match(g, preds)[1] if preds else 0.0 for g in gt_union]
    pred_hits = {t: sum(1 for v in pred_best if v >= t) for t in thresholds}
    gt_hits = {t: sum(1 for v in gt_best if v >= t) for t in thresholds}
    return pred_hits, gt_hits


def precision_recall(corpus: Corpus, thresholds: Sequence[float],
                     jobs: int = 1) -> PRTable:
    """Corpus-level PRTable: per-video precision/recall averaged over videos.

    The groundtruth for each video is the union (concatenation) of all its
    annotation sets. Videos with zero predictions count as precision 0 and
    are flagged in `zero_prediction_videos`. `jobs > 1` evaluates videos in
    parallel; results are identical either way.
    """
    thresholds = list(thresholds)
    prec_sum = {t: 0.0 for t in thresholds}
    rec_sum = {t: 0.0 for t in thresholds}
    n_videos = 0
    zero_pred = 0
    total_props = 0

    def one_video(video_id):
        record = corpus.videos[video_id]
        gt_union = [iv for ann in record.annotation_sets for iv in ann.intervals]
        if not gt_union:
            return None
        preds = [p.interval for p in record.predictions]
        if not preds:
            return len(preds), None, None, 0
        pred_hits, gt_hits = video_precision_recall(preds, gt_union, thresholds)
        return len(preds), pred_hits, gt_hits, len(gt_union)

    video_ids = corpus.video_ids()
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_video, video_ids))
    else:
        results = [one_video(v) for v in video_ids]

    for result in results:
        if result is None:
            continue
        n_preds, pred_hits, gt_hits, n_gt = result
        n_videos += 1
        total_props += n_preds
        if pred_hits is None:
            zero_pred += 1
            continue  # contributes 0 to both sums
        for t in thresholds:
            prec_sum[t] += pred_hits[t] / n_preds
            rec_sum[t] += gt_hits[t] / n_gt
    if n_videos == 0:
        raise ValueError("corpus has no videos with groundtruth")
    return PRTable(
        thresholds=thresholds,
        precision={t: prec_sum[t] / n_videos for t in thresholds},
        recall={t: rec_sum[t] / n_videos for t in thresholds},
        avg_proposals_per_video=total_props / n_videos,
        videos=n_videos,
        zero_prediction_videos=zero_pred,
    )
