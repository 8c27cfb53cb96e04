"""Caption accuracy and diversity metrics.

Accuracy: BLEU-4 (smoothed and unsmoothed) and CIDEr-D under the
tIoU-thresholded dense evaluation protocol, where a prediction's references
are the groundtruth sentences whose intervals overlap it at or above the
threshold and unmatched predictions score zero.

Diversity: per-video Self-BLEU and n-gram repetition, with per-set and
combined-set variants (the combined variants pool both annotation sets of a
video before scoring).
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Corpus
from .intervals import tiou

_STRIP = re.compile(r"^[^a-z0-9]+|[^a-z0-9]+$")

DENSE_EVAL_THRESHOLDS = (0.3, 0.5, 0.7, 0.9)
CIDER_SIGMA = 6.0
MAX_N = 4


def tokenize(sentence: str) -> List[str]:
    """Lowercase, split on whitespace, strip non-alphanumeric edges."""
    tokens = []
    for raw in sentence.lower().split():
        tok = _STRIP.sub("", raw)
        if tok:
            tokens.append(tok)
    return tokens


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: Sequence[str], references: Sequence[Sequence[str]],
          smoothing: bool = True) -> float:
    """Sentence BLEU-4 with brevity penalty.

    Smoothing adds one to the clipped-match numerator and the denominator
    for n >= 2. The brevity penalty uses the reference length closest to
    the candidate length (ties toward the shorter reference).
    """
    if not references:
        raise ValueError("references must be non-empty")
    candidate = list(candidate)
    if not candidate:
        return 0.0
    c = len(candidate)
    r = min((len(ref) for ref in references),
            key=lambda L: (abs(L - c), L))
    log_p_sum = 0.0
    for n in range(1, MAX_N + 1):
        cand_grams = _ngrams(candidate, n)
        total = sum(cand_grams.values())
        clipped = 0
        for gram, count in cand_grams.items():
            clipped += min(count, max(_ngrams(ref, n)[gram] for ref in references))
        if smoothing and n >= 2:
            clipped += 1
            total += 1
        if total == 0 or clipped == 0:
            return 0.0
        log_p_sum += math.log(clipped / total)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p_sum / MAX_N)


def corpus_bleu4(pairs: Sequence[Tuple[Sequence[str], Sequence[Sequence[str]]]]) -> float:
    """Corpus-level BLEU-4: n-gram counts pooled over all pairs, unsmoothed."""
    clipped = [0] * MAX_N
    total = [0] * MAX_N
    c_len = 0
    r_len = 0
    for candidate, references in pairs:
        candidate = list(candidate)
        if not references:
            continue
        c_len += len(candidate)
        r_len += min((len(ref) for ref in references),
                     key=lambda L: (abs(L - len(candidate)), L)) if candidate else \
            min(len(ref) for ref in references)
        for n in range(1, MAX_N + 1):
            grams = _ngrams(candidate, n)
            total[n - 1] += sum(grams.values())
            for gram, count in grams.items():
                clipped[n - 1] += min(
                    count, max(_ngrams(ref, n)[gram] for ref in references))
    if any(t == 0 for t in total) or any(m == 0 for m in clipped):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(clipped, total)) / MAX_N
    bp = 1.0 if c_len >= r_len else math.exp(1.0 - r_len / max(c_len, 1))
    return bp * math.exp(log_p)


# ---------------------------------------------------------------------------
# CIDEr-D

def _cider_vector(tokens: Sequence[str], df: Dict, log_n_docs: float):
    """Per-n TF-IDF vectors, their norms, and the token length."""
    vecs = []
    norms = []
    for n in range(1, MAX_N + 1):
        vec = {}
        for gram, count in _ngrams(tokens, n).items():
            idf = log_n_docs - math.log(max(df.get(gram, 0.0), 1.0))
            vec[gram] = count * idf
        vecs.append(vec)
        norms.append(math.sqrt(sum(v * v for v in vec.values())))
    return vecs, norms, len(tokens)


def build_document_frequency(reference_docs: Sequence[Sequence[Sequence[str]]]):
    """Document frequencies over a reference corpus.

    One document is one event's reference sentence set; an n-gram counts
    once per document it appears in. Returns (df, number of documents).
    """
    df: Dict = {}
    for doc in reference_docs:
        seen = set()
        for ref in doc:
            for n in range(1, MAX_N + 1):
                seen.update(_ngrams(ref, n))
        for gram in seen:
            df[gram] = df.get(gram, 0.0) + 1.0
    return df, len(reference_docs)


def cider_d_pair(candidate: Sequence[str], references: Sequence[Sequence[str]],
                 df: Dict, n_docs: int, sigma: float = CIDER_SIGMA) -> float:
    """CIDEr-D of one candidate against one event's reference set."""
    if not references:
        raise ValueError("references must be non-empty")
    log_n = math.log(max(n_docs, 1))
    cand_vecs, cand_norms, cand_len = _cider_vector(candidate, df, log_n)
    scores = np.zeros(MAX_N)
    for ref in references:
        ref_vecs, ref_norms, ref_len = _cider_vector(ref, df, log_n)
        penalty = math.exp(-((cand_len - ref_len) ** 2) / (2.0 * sigma ** 2))
        for n in range(MAX_N):
            num = 0.0
            for gram, cv in cand_vecs[n].items():
                rv = ref_vecs[n].get(gram, 0.0)
                num += min(cv, rv) * rv
            if cand_norms[n] > 0 and ref_norms[n] > 0:
                num /= cand_norms[n] * ref_norms[n]
            scores[n] += num * penalty
    scores /= len(references)
    return float(10.0 * scores.mean())


def cider_d(predictions_by_video: Dict[str, Sequence[str]],
            references_by_video: Dict[str, Sequence[Sequence[str]]]) -> float:
    """Corpus CIDEr-D for index-aligned predictions and reference sets.

    `references_by_video[vid][k]` is the list of reference sentences for the
    k-th event of the video; document frequencies come from those reference
    sets. Returns the mean over all (prediction, reference set) pairs.
    """
    docs = []
    for vid, ref_sets in references_by_video.items():
        for refs in ref_sets:
            docs.append([tokenize(r) for r in refs])
    if not docs:
        raise ValueError("empty reference corpus")
    df, n_docs = build_document_frequency(docs)
    scores = []
    doc_iter = iter(docs)
    for vid, ref_sets in references_by_video.items():
        cands = predictions_by_video.get(vid, [])
        for k, refs in enumerate(ref_sets):
            doc = next(doc_iter)
            if k < len(cands):
                scores.append(cider_d_pair(tokenize(cands[k]), doc, df, n_docs))
    if not scores:
        raise ValueError("no prediction/reference pairs to score")
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# Dense evaluation protocol

@dataclass
class DenseEvalReport:
    thresholds: List[float]
    bleu4_smoothed: Dict[float, float]
    bleu4_unsmoothed: Dict[float, float]
    bleu4_corpus: Dict[float, float]
    cider: Dict[float, float]
    matched: Dict[float, int]
    unmatched: Dict[float, int]

    @property
    def avg_bleu4_smoothed(self) -> float:
        return float(np.mean([self.bleu4_smoothed[t] for t in self.thresholds]))

    @property
    def avg_bleu4_unsmoothed(self) -> float:
        return float(np.mean([self.bleu4_unsmoothed[t] for t in self.thresholds]))

    @property
    def avg_cider(self) -> float:
        return float(np.mean([self.cider[t] for t in self.thresholds]))

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds,
            "bleu4_smoothed": {str(t): self.bleu4_smoothed[t] for t in self.thresholds},
            "bleu4_unsmoothed": {str(t): self.bleu4_unsmoothed[t] for t in self.thresholds},
            "bleu4_corpus": {str(t): self.bleu4_corpus[t] for t in self.thresholds},
            "cider": {str(t): self.cider[t] for t in self.thresholds},
            "matched": {str(t): self.matched[t] for t in self.thresholds},
            "unmatched": {str(t): self.unmatched[t] for t in self.thresholds},
            "avg_bleu4_smoothed": self.avg_bleu4_smoothed,
            "avg_bleu4_unsmoothed": self.avg_bleu4_unsmoothed,
            "avg_cider": self.avg_cider,
        }


def dense_eval(corpus: Corpus,
               thresholds: Sequence[float] = DENSE_EVAL_THRESHOLDS,
               jobs: int = 1) -> DenseEvalReport:
    """tIoU-thresholded caption evaluation.

    Per threshold: each prediction is scored against the groundtruth
    sentences (across all annotation sets) whose intervals reach the
    threshold; unmatched predictions score zero. Scores average over a
    video's predictions, then over videos. `jobs > 1` evaluates videos in
    parallel with identical results.
    """
    thresholds = list(thresholds)
    # document frequencies over all groundtruth events, one doc per event
    docs = []
    for vid in corpus.video_ids():
        for ann in corpus.videos[vid].annotation_sets:
            for sent in ann.sentences:
                docs.append([tokenize(sent)])
    df, n_docs = build_document_frequency(docs)

    b_s = {t: [] for t in thresholds}
    b_u = {t: [] for t in thresholds}
    cid = {t: [] for t in thresholds}
    corpus_pairs = {t: [] for t in thresholds}
    matched = {t: 0 for t in thresholds}
    unmatched = {t: 0 for t in thresholds}

    def one_video(vid):
        record = corpus.videos[vid]
        gt = [(iv, sent) for ann in record.annotation_sets
              for iv, sent in zip(ann.intervals, ann.sentences)]
        preds = record.predictions
        if not preds:
            return None
        for pred in preds:
            if pred.sentence is None:
                raise ValueError(f"{vid}: prediction without sentence")
        out = {}
        for t in thresholds:
            vb_s, vb_u, vc, pairs = [], [], [], []
            n_matched = n_unmatched = 0
            for pred in preds:
                refs = [tokenize(sent) for iv, sent in gt
                        if tiou(pred.interval, iv) >= t]
                cand = tokenize(pred.sentence)
                if refs:
                    n_matched += 1
                    vb_s.append(bleu4(cand, refs, smoothing=True))
                    vb_u.append(bleu4(cand, refs, smoothing=False))
                    vc.append(cider_d_pair(cand, refs, df, n_docs))
                    pairs.append((cand, refs))
                else:
                    n_unmatched += 1
                    vb_s.append(0.0)
                    vb_u.append(0.0)
                    vc.append(0.0)
            out[t] = (float(np.mean(vb_s)), float(np.mean(vb_u)),
                      float(np.mean(vc)), pairs, n_matched, n_unmatched)
        return out

    video_ids = corpus.video_ids()
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_video, video_ids))
    else:
        results = [one_video(v) for v in video_ids]

    for out in results:
        if out is None:
            continue
        for t in thresholds:
            v_bs, v_bu, v_c, pairs, n_m, n_u = out[t]
            b_s[t].append(v_bs)
            b_u[t].append(v_bu)
            cid[t].append(v_c)
            corpus_pairs[t].extend(pairs)
            matched[t] += n_m
            unmatched[t] += n_u

    def avg(per_video):
        return {t: (float(np.mean(v)) if v else 0.0) for t, v in per_video.items()}

    return DenseEvalReport(
        thresholds=thresholds,
        bleu4_smoothed=avg(b_s),
        bleu4_unsmoothed=avg(b_u),
        bleu4_corpus={t: corpus_bleu4(corpus_pairs[t]) for t in thresholds},
        cider=avg(cid),
        matched=matched,
        unmatched=unmatched,
    )


# ---------------------------------------------------------------------------
# Diversity metrics

@dataclass
class DiversityReport:
    self_bleu: float
    repetition: float
    self_bleu_combined: float
    repetition_combined: float
    per_video: Dict[str, dict] = field(default_factory=dict)
    excluded_self_bleu_videos: int = 0

    def to_dict(self) -> dict:
        return {
            "SelfB": self.self_bleu,
            "RE": self.repetition,
            "SelfB2": self.self_bleu_combined,
            "RE2": self.repetition_combined,
            "excluded_self_bleu_videos": self.excluded_self_bleu_videos,
            "per_video": self.per_video,
        }


def _video_self_bleu(captions: Sequence[Sequence[str]]) -> Optional[float]:
    """Mean smoothed BLEU-4 of each caption against the rest, times 100."""
    if len(captions) < 2:
        return None
    scores = []
    for i, cand in enumerate(captions):
        rest = [c for j, c in enumerate(captions) if j != i]
        scores.append(bleu4(cand, rest, smoothing=True))
    return 100.0 * float(np.mean(scores))


def _video_repetition(captions: Sequence[Sequence[str]], n: int) -> Optional[float]:
    """Repeated-occurrence fraction of the video's pooled n-grams, times 100."""
    counts = Counter()
    for cap in captions:
        counts.update(_ngrams(cap, n))
    total = sum(counts.values())
    if total == 0:
        return None
    repeats = sum(c - 1 for c in counts.values() if c > 1)
    return 100.0 * repeats / total


def _per_set_then_combined(captions_by_set_by_video, metric):
    """Apply a per-video metric in per-set and combined modes.

    Per-set: corpus value per set index, averaged over set indices.
    Combined: all sets of a video pooled before scoring. Returns
    (per_set value, combined value, per-video detail, excluded count).
    """
    n_sets = max((len(sets) for sets in captions_by_set_by_video.values()),
                 default=0)
    per_set_values = []
    excluded = 0
    detail: Dict[str, dict] = {}
    for s in range(n_sets):
        vals = []
        for vid, sets in sorted(captions_by_set_by_video.items()):
            if s >= len(sets):
                continue
            v = metric(sets[s])
            detail.setdefault(vid, {})[f"set{s}"] = v
            if v is None:
                excluded += 1
            else:
                vals.append(v)
        if vals:
            per_set_values.append(float(np.mean(vals)))
    combined_vals = []
    for vid, sets in sorted(captions_by_set_by_video.items()):
        pooled = [cap for one_set in sets for cap in one_set]
        v = metric(pooled)
        detail.setdefault(vid, {})["combined"] = v
        if v is not None:
            combined_vals.append(v)
    per_set = float(np.mean(per_set_values)) if per_set_values else 0.0
    combined = float(np.mean(combined_vals)) if combined_vals else 0.0
    return per_set, combined, detail, excluded


def _tokenized(captions_by_set_by_video):
    return {vid: [[tokenize(c) if isinstance(c, str) else list(c) for c in one_set]
                  for one_set in sets]
            for vid, sets in captions_by_set_by_video.items()}


def self_bleu(captions_by_set_by_video, mode: str = "per_set") -> float:
    """Corpus Self-BLEU in [0, 100]; lower means more diverse captions."""
    tok = _tokenized(captions_by_set_by_video)
    per_set, combined, _, _ = _per_set_then_combined(tok, _video_self_bleu)
    if mode == "per_set":
        return per_set
    if mode == "combined":
        return combined
    raise ValueError(f"unknown mode {mode!r}")


def repetition(captions_by_set_by_video, n: int = 4,
               mode: str = "per_set") -> float:
    """Corpus n-gram repetition score in [0, 100]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tok = _tokenized(captions_by_set_by_video)
    per_set, combined, _, _ = _per_set_then_combined(
        tok, lambda caps: _video_repetition(caps, n))
    if mode == "per_set":
        return per_set
    if mode == "combined":
        return combined
    raise ValueError(f"unknown mode {mode!r}")


def diversity_report(captions_by_set_by_video, n: int = 4) -> DiversityReport:
    """SelfB/RE plus their combined-set variants with per-video breakdown."""
    tok = _tokenized(captions_by_set_by_video)
    sb, sb2, sb_detail, excluded = _per_set_then_combined(tok, _video_self_bleu)
    re_, re2, re_detail, _ = _per_set_then_combined(
        tok, lambda caps: _video_repetition(caps, n))
    per_video = {vid: {"self_bleu": sb_detail.get(vid, {}),
                       "repetition": re_detail.get(vid, {})}
                 for vid in sorted(tok)}
    return DiversityReport(sb, re_, sb2, re2, per_video, excluded)
