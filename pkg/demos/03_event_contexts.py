"""Extract the five context views used when describing one event.

For each event we gather: its own segment range, local windows immediately
before/after it, a global mask excluding it, the indices of neighboring
events, and the captions of all preceding events. Features pooled over any
of these selections condition a caption generator on its surroundings.
"""

import numpy as np

from densecap import TimeInterval, VideoMeta, build_bundle, pool_features
from densecap.synthetic import synthetic_grid


def main():
    meta = VideoMeta("demo", duration_s=64.0, fps=16.0)  # sixteen 4 s segments
    events = [TimeInterval(4, 12), TimeInterval(20, 36), TimeInterval(44, 60)]
    captions = ["a person enters the kitchen",
                "they chop vegetables on a board",
                "the finished dish is plated"]
    grid = synthetic_grid(meta, dim=8, seed=0)

    for target in range(len(events)):
        bundle = build_bundle(events, target, meta, captions=captions)
        print(f"event {target}: segments {bundle.event_range}")
        print(f"  local before {bundle.local_before}, after {bundle.local_after}")
        print(f"  global mask keeps {int(bundle.global_mask.sum())}"
              f"/{meta.segment_count} segments")
        print(f"  neighbor events: {bundle.neighbor_events}")
        print(f"  sentence history: {bundle.sentence_history}")
        pooled = pool_features(grid, bundle.event_range, mode="mean")
        print(f"  mean-pooled event feature, first 3 dims: "
              f"{np.round(pooled[:3], 3)}")
        print()


if __name__ == "__main__":
    main()
