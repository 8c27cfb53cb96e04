"""Context extraction over the segment grid.

Five kinds of context around a target event, all realized as deterministic
index-set extraction plus feature pooling: segment-level features come from
the grid itself, local windows sit immediately before/after the event,
global context is everything outside the event, event context is the other
events, and sentence context is the captions generated so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import SegmentGrid, TimeInterval, VideoMeta, segment_range


class EmptyContext(Exception):
    """Pooling was asked for an empty segment selection."""


@dataclass
class EventContextBundle:
    event_range: Tuple[int, int]
    local_before: Tuple[int, int]
    local_after: Tuple[int, int]
    global_mask: np.ndarray  # bool per segment, True = included
    neighbor_events: List[int]
    sentence_history: List[str]


def local_context(event: TimeInterval, meta: VideoMeta,
                  window_ratio: float = 0.5):
    """Segment ranges of the windows immediately before and after the event.

    Each window has length window_ratio * |event|, clipped to the video; the
    resulting ranges are additionally clipped against the event's own range
    so they never overlap it. Empty ranges (i == j) occur at the video
    boundaries.
    """
    if window_ratio <= 0:
        raise ValueError("window_ratio must be > 0")
    ev_i, ev_j = segment_range(event, meta)
    w = window_ratio * event.length_s

    before_start = max(0.0, event.start_s - w)
    if before_start < event.start_s:
        b_i, b_j = segment_range(TimeInterval(before_start, event.start_s), meta)
        before = (min(b_i, ev_i), min(b_j, ev_i))
    else:
        before = (ev_i, ev_i)

    after_end = min(meta.duration_s, event.end_s + w)
    if after_end > event.end_s:
        a_i, a_j = segment_range(TimeInterval(event.end_s, after_end), meta)
        after = (max(a_i, ev_j), max(a_j, ev_j))
    else:
        after = (ev_j, ev_j)
    return before, after


def global_context(event: TimeInterval, meta: VideoMeta) -> np.ndarray:
    """Boolean mask selecting every segment outside the event's range."""
    i, j = segment_range(event, meta)
    mask = np.ones(meta.segment_count, dtype=bool)
    mask[i:j] = False
    return mask


def event_neighbors(events: Sequence[TimeInterval], target: int,
                    direction: str = "uni") -> List[int]:
    """Neighbor event indices in temporal order.

    "uni" returns only past events (indices before the target in start-time
    order), "bi" returns all other events. `events` must already be sorted
    by start time.
    """
    if direction not in ("uni", "bi"):
        raise ValueError(f"unknown direction {direction!r}")
    if not (0 <= target < len(events)):
        raise IndexError(f"target {target} out of range")
    if direction == "uni":
        return list(range(target))
    return [i for i in range(len(events)) if i != target]


def sentence_history(captions: Sequence[str], target: int) -> List[str]:
    """Captions generated for events before the target, in order.

    Callers decode events sequentially, so asking for event i's history only
    makes sense once events 0..i-1 have captions.
    """
    if not (0 <= target <= len(captions)):
        raise IndexError(f"target {target} out of range")
    return list(captions[:target])


def pool_features(grid: SegmentGrid, selection, mode: str = "mean") -> np.ndarray:
    """Mean or max pool the selected feature rows into one vector.

    `selection` is a (start, end) index range, an index sequence, or a
    boolean mask. Raises EmptyContext on an empty selection so the caller
    can substitute a zero vector of the right dimension.
    """
    if grid.features is None:
        raise ValueError(f"{grid.meta.video_id}: grid has no features")
    if isinstance(selection, tuple) and len(selection) == 2:
        rows = grid.features[selection[0]:selection[1]]
    else:
        selection = np.asarray(selection)
        if selection.dtype == bool:
            rows = grid.features[selection]
        else:
            rows = grid.features[selection.astype(int)]
    if rows.shape[0] == 0:
        raise EmptyContext("empty segment selection")
    if mode == "mean":
        return rows.mean(axis=0)
    if mode == "max":
        return rows.max(axis=0)
    raise ValueError(f"unknown pooling mode {mode!r}")


def build_bundle(events: Sequence[TimeInterval], target: int, meta: VideoMeta,
                 captions: Optional[Sequence[str]] = None,
                 window_ratio: float = 0.5,
                 direction: str = "bi") -> EventContextBundle:
    """Assemble the full context bundle for one event of a sorted event list."""
    event = events[target]
    before, after = local_context(event, meta, window_ratio)
    history = sentence_history(captions, target) if captions is not None else []
    return EventContextBundle(
        event_range=segment_range(event, meta),
        local_before=before,
        local_after=after,
        global_mask=global_context(event, meta),
        neighbor_events=event_neighbors(events, target, direction),
        sentence_history=history,
    )
