"""Pick a small, ordered set of event proposals with fused scoring.

Multi-scale sliding windows over one video produce dozens of candidates;
a pointwise scorer rates each in isolation while a sequential scorer rates
each given what was already picked. The selection loop multiplies the two
and stops when the sequential scorer prefers "end of sequence", so a video
with three events yields roughly three proposals instead of eighty.
"""

from densecap import (CandidatePool, FusionConfig, HeuristicPointwiseScorer,
                      HeuristicSequentialScorer, TimeInterval, VideoMeta,
                      enumerate_sliding_windows, fuse_select, tiou)


def main():
    meta = VideoMeta("demo", duration_s=120.0)
    true_events = [TimeInterval(5, 20), TimeInterval(42, 60),
                   TimeInterval(90, 115)]

    windows = enumerate_sliding_windows(meta)
    print(f"{len(windows)} candidate windows over a {meta.duration_s:.0f} s video")

    f_s = HeuristicPointwiseScorer(true_events)
    f_e = HeuristicSequentialScorer(true_events)
    pool = CandidatePool.from_windows(windows, f_s, cap=80)
    print(f"kept the top {len(pool)} by pointwise score")

    selected = fuse_select(pool, f_s, f_e, FusionConfig(k=1))
    print(f"\nselected {len(selected)} proposals:")
    for s in selected:
        best = max(tiou(s.interval, e) for e in true_events)
        print(f"  step {s.step}: [{s.interval.start_s:6.1f}, "
              f"{s.interval.end_s:6.1f}]  fused score {s.score:.3f}  "
              f"best tIoU vs truth {best:.2f}")

    print("\ntrue events were:")
    for e in true_events:
        print(f"  [{e.start_s:6.1f}, {e.end_s:6.1f}]")


if __name__ == "__main__":
    main()
