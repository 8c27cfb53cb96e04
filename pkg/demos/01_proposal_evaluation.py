"""Evaluate event proposals against groundtruth with temporal IoU.

Generates a small synthetic corpus, copies the groundtruth intervals into
the prediction slots (a perfect proposer), then perturbs them to show how
precision and recall degrade as the tIoU threshold tightens.
"""

from densecap import (PredictionEntry, TimeInterval, precision_recall, tiou)
from densecap.synthetic import gen_synthetic, identity_predictions


def main():
    corpus = identity_predictions(gen_synthetic(20, seed=1))
    thresholds = [0.3, 0.5, 0.7, 0.9]

    print("Perfect proposer (predictions == groundtruth):")
    table = precision_recall(corpus, thresholds)
    for t, p, r in table.rows():
        print(f"  tIoU {t:.1f}: precision {p:.3f}  recall {r:.3f}")
    print(f"  avg proposals/video: {table.avg_proposals_per_video:.2f}")

    # shift every prediction by 30% of its length: high-threshold rows drop
    for record in corpus.videos.values():
        shifted = []
        for pred in record.predictions:
            d = 0.3 * pred.interval.length_s
            end = min(record.meta.duration_s, pred.interval.end_s + d)
            shifted.append(PredictionEntry(
                TimeInterval(pred.interval.start_s + d, max(end, pred.interval.start_s + d + 0.1)),
                proposal_score=1.0))
        record.predictions = shifted

    print("\nSame proposer shifted by 30% of each event length:")
    table = precision_recall(corpus, thresholds)
    for t, p, r in table.rows():
        print(f"  tIoU {t:.1f}: precision {p:.3f}  recall {r:.3f}")

    a = TimeInterval(0, 10)
    b = TimeInterval(3, 13)
    print(f"\nFor reference, tIoU([0,10], [3,13]) = {tiou(a, b):.4f}")


if __name__ == "__main__":
    main()
