"""Re-rank proposals and captions, and mine extra training pairs.

Proposal re-ranking z-normalizes four factors (confidence, caption
describability, temporal position, relative length) and keeps the top
five. Caption re-ranking picks the hypothesis with the most varied wording
that also mentions the detected concepts. Augmentation pairs any proposal
overlapping a groundtruth event at tIoU > 0.3 with that event's sentence,
enlarging a captioning training set beyond the exact annotations.
"""

import numpy as np

from densecap import (AnnotationSet, CaptionRerankParams, ConceptVocabulary,
                      PredictionEntry, TimeInterval, VideoMeta, augment,
                      caption_rerank, proposal_rerank)


def main():
    meta = VideoMeta("demo", duration_s=100.0)
    cands = [
        PredictionEntry(TimeInterval(0, 10), "a man waves", 0.9, -2.0),
        PredictionEntry(TimeInterval(40, 60), "a man runs", 0.6, -1.0),
        PredictionEntry(TimeInterval(20, 25), "a blur", 0.3, -8.0),
        PredictionEntry(TimeInterval(80, 100), "credits roll", 0.1, -4.0),
        PredictionEntry(TimeInterval(10, 30), "a dog barks", 0.5, -2.5),
        PredictionEntry(TimeInterval(55, 70), "people talk", 0.7, -3.0),
    ]
    ranked, missing = proposal_rerank(cands, meta)
    print(f"top {len(ranked)} of {len(cands)} proposals after re-ranking:")
    for c in ranked:
        print(f"  [{c.interval.start_s:5.1f}, {c.interval.end_s:5.1f}] "
              f"score {c.proposal_score:.2f}  \"{c.sentence}\"")

    vocab = ConceptVocabulary(["guitar", "man", "plays", "sings"])
    concept_probs = np.array([0.92, 0.85, 0.60, 0.15])
    hypotheses = [
        "a man a man a man appears",
        "a man plays a guitar on stage",
        "someone does something somewhere now",
    ]
    best = caption_rerank(hypotheses, concept_probs, vocab,
                          CaptionRerankParams(alpha=0.5, beta=0.5))
    print(f"\nbest caption among {len(hypotheses)} hypotheses: \"{best}\"")

    ann = AnnotationSet(
        [TimeInterval(0, 10), TimeInterval(30, 50)],
        ["a chef seasons the soup", "guests arrive at the table"])
    proposals = [TimeInterval(1, 11), TimeInterval(33, 48),
                 TimeInterval(60, 70)]
    pairs = augment(proposals, ann)
    print(f"\naugmentation kept {len(pairs)} of {len(proposals)} proposals:")
    for p in pairs:
        print(f"  [{p.interval.start_s:4.1f}, {p.interval.end_s:4.1f}] "
              f"tIoU {p.tiou:.2f} -> \"{p.caption}\"")


if __name__ == "__main__":
    main()
