"""Sliding-window candidate enumeration and fused proposal selection.

The selector combines a pointwise ranking score f_s with a sequential
(pointer-style) score f_e: at each step it stops if the sequential model's
argmax over remaining candidates plus EOS is EOS, otherwise it picks the
candidate maximizing f_s * f_e, extends the selection prefix by that single
candidate, and appends the top-K candidates by fused score to the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .core import SegmentGrid, TimeInterval, VideoMeta
from .intervals import tiou

DEFAULT_SCALES = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEDUP_TOL_S = 1e-6
DISTRIBUTION_TOL = 1e-6


class FusionError(RuntimeError):
    """A scorer violated its contract (e.g. non-normalized distribution)."""


class PointwiseScorer(Protocol):
    def score(self, candidate: TimeInterval, grid: Optional[SegmentGrid]) -> float:
        """Deterministic ranking score in (0, 1]."""


class SequentialScorer(Protocol):
    def distribution(self, prefix: List[int], pool: "CandidatePool",
                     grid: Optional[SegmentGrid]):
        """Probabilities over remaining candidates and EOS.

        Returns ({candidate_index: prob}, eos_prob) covering exactly the
        candidates not in `prefix`; the whole thing must sum to 1.
        """


@dataclass
class CandidatePool:
    """Deduplicated candidate intervals with their pointwise scores."""

    candidates: List[TimeInterval]
    scores: Optional[np.ndarray] = None  # f_s per candidate, aligned with `candidates`

    def __len__(self):
        return len(self.candidates)

    @classmethod
    def from_windows(cls, windows: Sequence[TimeInterval], scorer: PointwiseScorer,
                     grid: Optional[SegmentGrid] = None,
                     cap: int = 80) -> "CandidatePool":
        """Score windows, keep the top `cap` by f_s, dedup near-identical ones."""
        windows = _dedup(windows)
        scores = np.array([scorer.score(w, grid) for w in windows])
        order = np.argsort(-scores, kind="stable")[:cap]
        keep = sorted(order.tolist())  # preserve enumeration order
        return cls([windows[i] for i in keep], scores[keep])


@dataclass
class FusionConfig:
    k: int = 1
    max_steps: int = 20
    candidate_cap: int = 80

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.candidate_cap < 1:
            raise ValueError("candidate_cap must be >= 1")


@dataclass(frozen=True)
class FusedProposal:
    interval: TimeInterval
    score: float
    step: int


def _dedup(windows: Sequence[TimeInterval]) -> List[TimeInterval]:
    out: List[TimeInterval] = []
    for w in windows:
        if not any(abs(w.start_s - o.start_s) <= DEDUP_TOL_S
                   and abs(w.end_s - o.end_s) <= DEDUP_TOL_S for o in out):
            out.append(w)
    return out


def enumerate_sliding_windows(meta: VideoMeta,
                              scales: Sequence[float] = DEFAULT_SCALES,
                              stride_ratio: float = 0.5) -> List[TimeInterval]:
    """Multi-scale sliding windows over [0, duration], sorted by (start, length).

    For each scale, windows of length scale * duration start at multiples of
    stride_ratio * length; a final window is clamped to end at the duration
    when the regular stride would overshoot. Duplicates are removed.
    """
    if not all(0 < s <= 1 for s in scales):
        raise ValueError("scales must lie in (0, 1]")
    if not (0 < stride_ratio <= 1):
        raise ValueError("stride_ratio must lie in (0, 1]")
    duration = meta.duration_s
    windows: List[TimeInterval] = []
    for scale in scales:
        length = scale * duration
        stride = stride_ratio * length
        k = 0
        last_end = 0.0
        while k * stride + length <= duration + DEDUP_TOL_S:
            start = k * stride
            end = min(start + length, duration)
            windows.append(TimeInterval(start, end))
            last_end = end
            k += 1
        if last_end < duration - DEDUP_TOL_S:
            windows.append(TimeInterval(duration - length, duration))
    windows = _dedup(windows)
    windows.sort(key=lambda w: (w.start_s, w.length_s))
    return windows


def _checked_distribution(f_e: SequentialScorer, prefix, pool, grid):
    probs, eos = f_e.distribution(prefix, pool, grid)
    remaining = set(range(len(pool))) - set(prefix)
    if set(probs) != remaining:
        raise FusionError("sequential scorer must cover exactly the remaining candidates")
    total = sum(probs.values()) + eos
    if abs(total - 1.0) > DISTRIBUTION_TOL or eos < 0 or any(p < 0 for p in probs.values()):
        raise FusionError(f"sequential scorer returned a non-distribution (sum={total})")
    return probs, eos


def fuse_select(pool: CandidatePool, f_s: PointwiseScorer, f_e: SequentialScorer,
                cfg: FusionConfig = FusionConfig(),
                grid: Optional[SegmentGrid] = None) -> List[FusedProposal]:
    """Fused inference over a candidate pool.

    The stopping test uses the raw sequential distribution (argmax over
    remaining candidates plus EOS); the per-step selection uses the product
    f_s * f_e. The prefix grows by exactly one candidate per step while the
    output gains up to `cfg.k` (deduplicated), so with k=1 the output equals
    the prefix sequence.
    """
    if len(pool) == 0:
        raise ValueError("candidate pool is empty")
    f_s_vals = pool.scores if pool.scores is not None else np.array(
        [f_s.score(c, grid) for c in pool.candidates])

    prefix: List[int] = []
    selected: List[FusedProposal] = []
    selected_idx: set = set()
    for step in range(cfg.max_steps):
        remaining = [i for i in range(len(pool)) if i not in prefix]
        if not remaining:
            break
        probs, eos = _checked_distribution(f_e, prefix, pool, grid)
        # raw-f_e stopping rule; candidate ties beat EOS ties deterministically
        best_cand = max(remaining, key=lambda i: (probs[i], -i))
        if eos > probs[best_cand]:
            break
        fused = {i: f_s_vals[i] * probs[i] for i in remaining}
        ranked = sorted(remaining, key=lambda i: (-fused[i], i))
        prefix.append(ranked[0])
        for i in ranked[:cfg.k]:
            if i not in selected_idx:
                selected_idx.add(i)
                selected.append(FusedProposal(pool.candidates[i], fused[i], step))
    return selected


# ---------------------------------------------------------------------------
# Heuristic oracle scorers: stand-ins for the trained ranking and sequential
# models, driven by a set of planted attractor intervals. They make the full
# pipeline runnable (and testable) without any neural model.

@dataclass
class HeuristicPointwiseScorer:
    """f_s(c) = max tIoU of c against any attractor, floored at 1e-3."""

    attractors: List[TimeInterval]
    floor: float = 1e-3

    def score(self, candidate: TimeInterval, grid=None) -> float:
        if not self.attractors:
            return self.floor
        return max(self.floor, max(tiou(candidate, a) for a in self.attractors))


@dataclass
class HeuristicSequentialScorer:
    """Weights candidates by their best tIoU to attractors not yet covered.

    An attractor counts as covered once some prefix member overlaps it with
    tIoU >= `cover_tiou`. EOS weight is 1 when everything is covered, else a
    small constant, and the whole thing is normalized to a distribution.
    """

    attractors: List[TimeInterval]
    cover_tiou: float = 0.5
    eos_weight_open: float = 0.05

    def distribution(self, prefix, pool: CandidatePool, grid=None):
        covered = [
            any(tiou(pool.candidates[p], a) >= self.cover_tiou for p in prefix)
            for a in self.attractors
        ]
        uncovered = [a for a, c in zip(self.attractors, covered) if not c]
        remaining = [i for i in range(len(pool)) if i not in prefix]
        if uncovered:
            weights = {i: max((tiou(pool.candidates[i], a) for a in uncovered),
                              default=0.0)
                       for i in remaining}
            eos = self.eos_weight_open
        else:
            weights = {i: 0.0 for i in remaining}
            eos = 1.0
        total = sum(weights.values()) + eos
        return {i: w / total for i, w in weights.items()}, eos / total


@dataclass
class TableSequentialScorer:
    """Step-indexed distributions, for precomputed f_e tables.

    `steps[t]` is ({candidate_index: prob}, eos_prob) for step t; entries for
    already-selected candidates are dropped and the rest renormalized.
    """

    steps: List[Tuple[Dict[int, float], float]]

    def distribution(self, prefix, pool: CandidatePool, grid=None):
        t = len(prefix)
        if t >= len(self.steps):
            remaining = [i for i in range(len(pool)) if i not in prefix]
            return {i: 0.0 for i in remaining}, 1.0
        probs, eos = self.steps[t]
        kept = {i: p for i, p in probs.items() if i not in prefix}
        for i in range(len(pool)):
            if i not in prefix:
                kept.setdefault(i, 0.0)
        total = sum(kept.values()) + eos
        if total <= 0:
            raise FusionError("table step has zero total mass")
        return {i: p / total for i, p in kept.items()}, eos / total


@dataclass
class TablePointwiseScorer:
    """Pointwise scores looked up from a precomputed table by candidate index."""

    pool: CandidatePool
    values: Sequence[float]

    def score(self, candidate: TimeInterval, grid=None) -> float:
        for i, c in enumerate(self.pool.candidates):
            if (abs(c.start_s - candidate.start_s) <= DEDUP_TOL_S
                    and abs(c.end_s - candidate.end_s) <= DEDUP_TOL_S):
                return float(self.values[i])
        raise KeyError(f"candidate {candidate} not in score table")
