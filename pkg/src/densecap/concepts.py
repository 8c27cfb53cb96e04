"""Linear multi-instance multi-label concept predictor.

A proposal is a bag of segments: segment-level probabilities come from a
linear-sigmoid layer, the proposal-level prediction is the element-wise max
over K evenly selected segments, and training minimizes binary cross
entropy with the subgradient of the max routed to the (first) argmax
segment per concept.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import CorpusFormatError, SegmentGrid, TimeInterval, VideoMeta, segment_range

LOGIT_CLAMP = 30.0
PROB_CLAMP = 1e-7

_MODEL_MAGIC = b"CONM"


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class ConceptVocabulary:
    concepts: List[str]

    def __post_init__(self):
        if not self.concepts:
            raise ValueError("vocabulary must contain at least one concept")
        if len(set(self.concepts)) != len(self.concepts):
            raise ValueError("duplicate concepts in vocabulary")
        self.lookup: Dict[str, int] = {c: i for i, c in enumerate(self.concepts)}

    def __len__(self):
        return len(self.concepts)


def build_vocabulary(token_counts: Dict[str, int], lexicon: Sequence[str],
                     min_count: int = 1) -> ConceptVocabulary:
    """Frequent lexicon words, ordered by descending count then alphabetically."""
    lexicon = set(lexicon)
    kept = [(tok, n) for tok, n in token_counts.items()
            if tok in lexicon and n >= min_count]
    if not kept:
        raise ValueError("no lexicon token reaches min_count")
    kept.sort(key=lambda kv: (-kv[1], kv[0]))
    return ConceptVocabulary([tok for tok, _ in kept])


@dataclass
class LinearConceptModel:
    W: np.ndarray  # (C, D)
    b: np.ndarray  # (C,)
    vocabulary: ConceptVocabulary

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError("W must be (C, D) with b of length C")
        if self.W.shape[0] != len(self.vocabulary):
            raise ValueError("weight rows must match vocabulary size")
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise ValueError("model parameters must be finite")

    @property
    def n_concepts(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]


@dataclass
class MimlExample:
    proposal: TimeInterval
    grid: SegmentGrid
    labels: np.ndarray  # binary, length C

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 32
    k_segments: int = 20
    seed: int = 0
    weight_init_scale: float = 0.01

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.k_segments < 1:
            raise ValueError("k_segments must be >= 1")


def _sigmoid(logits: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)))


def predict_segment(model: LinearConceptModel, feature: np.ndarray) -> np.ndarray:
    """Per-concept probabilities for one segment feature vector."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != (model.dim,):
        raise ValueError(f"feature dim {feature.shape} != model dim {model.dim}")
    return _sigmoid(model.W @ feature + model.b)


def select_even_segments(proposal: TimeInterval, meta: VideoMeta, k: int) -> List[int]:
    """K evenly spaced segment indices inside the proposal's range.

    linspace over [i, j-1] with half-up rounding; indices repeat when the
    range is shorter than K.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    i, j = segment_range(proposal, meta)
    points = np.linspace(i, j - 1, num=k)
    return [int(math.floor(p + 0.5)) for p in points]


def _gather_features(example: MimlExample, k: int) -> np.ndarray:
    if example.grid.features is None:
        raise ValueError(f"{example.grid.meta.video_id}: grid has no features")
    idx = select_even_segments(example.proposal, example.grid.meta, k)
    return example.grid.features[idx]  # (k, D)


def predict_proposal(model: LinearConceptModel, grid: SegmentGrid,
                     proposal: TimeInterval, k: int = 20) -> np.ndarray:
    """Max-pooled per-concept probabilities over K selected segments."""
    feats = _gather_features(MimlExample(proposal, grid, np.zeros(model.n_concepts)), k)
    logits = feats @ model.W.T + model.b  # (k, C)
    return _sigmoid(logits).max(axis=0)


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross entropy over concepts, with probability clamping."""
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def objective_and_gradient(W: np.ndarray, b: np.ndarray,
                           feature_bags: Sequence[np.ndarray],
                           labels: np.ndarray):
    """Batch BCE objective and its analytic (sub)gradient.

    `feature_bags` holds one (K, D) array per example. The loss is the mean
    over examples of the mean over concepts of BCE on the max-pooled
    probabilities; the gradient of each max flows through the first argmax
    segment of that concept.
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n, c = len(feature_bags), W.shape[0]
    dW = np.zeros_like(W)
    db = np.zeros_like(b)
    total = 0.0
    for bag, y in zip(feature_bags, labels):
        logits = bag @ W.T + b  # (K, C)
        clamped = np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)
        probs = 1.0 / (1.0 + np.exp(-clamped))
        k_star = np.argmax(clamped, axis=0)  # first argmax per concept
        pooled = probs[k_star, np.arange(c)]
        total += bce_loss(pooled, y)
        # d(BCE)/d(logit) at the pooled probability; clamps and the BCE
        # probability clip kill the gradient outside their linear region
        p_clip = np.clip(pooled, PROB_CLAMP, 1 - PROB_CLAMP)
        active = ((pooled == p_clip)
                  & (np.abs(logits[k_star, np.arange(c)]) < LOGIT_CLAMP))
        g = (pooled - y) / (c * n) * active
        dW += g[:, None] * bag[k_star]  # (C, D)
        db += g
    return total / n, dW, db


def train(examples: Sequence[MimlExample], cfg: TrainConfig = TrainConfig(),
          vocabulary: Optional[ConceptVocabulary] = None):
    """Mini-batch gradient descent on proposal-level BCE.

    Deterministic for a fixed seed. Returns (model, per-epoch loss trace);
    the trace holds the full-dataset loss after each epoch.
    """
    if not examples:
        raise ValueError("no training examples")
    c = len(examples[0].labels)
    bags = [_gather_features(ex, cfg.k_segments) for ex in examples]
    d = bags[0].shape[1]
    labels = np.stack([ex.labels for ex in examples])
    if vocabulary is None:
        vocabulary = ConceptVocabulary([f"concept_{i}" for i in range(c)])

    rng = np.random.default_rng(cfg.seed)
    W = rng.normal(scale=cfg.weight_init_scale, size=(c, d))
    b = np.zeros(c)

    trace = []
    order = np.arange(len(examples))
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            _, dW, db = objective_and_gradient(W, b, [bags[i] for i in idx],
                                               labels[idx])
            W -= cfg.learning_rate * dW
            b -= cfg.learning_rate * db
        loss, _, _ = objective_and_gradient(W, b, bags, labels)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch)
        trace.append(loss)
    return LinearConceptModel(W, b, vocabulary), trace


def proposal_accuracy(model: LinearConceptModel, examples: Sequence[MimlExample],
                      k: int = 20, threshold: float = 0.5) -> float:
    """Fraction of (proposal, concept) pairs predicted correctly at 0.5."""
    correct = 0
    total = 0
    for ex in examples:
        probs = predict_proposal(model, ex.grid, ex.proposal, k)
        correct += int(np.sum((probs >= threshold) == (ex.labels >= 0.5)))
        total += len(ex.labels)
    return correct / total


def assign_segment_labels(proposals: Sequence[TimeInterval],
                          proposal_labels: Sequence[np.ndarray],
                          meta: VideoMeta) -> np.ndarray:
    """Per-segment label matrix: each proposal stamps its labels onto its
    segment range; overlaps take the element-wise OR; uncovered segments
    stay all-zero."""
    if len(proposals) != len(proposal_labels):
        raise ValueError("proposals and labels must align")
    c = len(proposal_labels[0]) if proposal_labels else 0
    out = np.zeros((meta.segment_count, c))
    for proposal, labels in zip(proposals, proposal_labels):
        i, j = segment_range(proposal, meta)
        out[i:j] = np.maximum(out[i:j], np.asarray(labels, dtype=np.float64))
    return out


# ---------------------------------------------------------------------------
# Model files: binary float64 container plus a JSON export for inspection.

def save_model(model: LinearConceptModel, path, binary: bool = True) -> None:
    header = {
        "n_concepts": model.n_concepts,
        "dim": model.dim,
        "vocabulary": model.vocabulary.concepts,
    }
    if binary:
        payload = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(_MODEL_MAGIC)
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)
            f.write(np.ascontiguousarray(model.W, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(model.b, dtype="<f8").tobytes())
    else:
        header["W"] = model.W.tolist()
        header["b"] = model.b.tolist()
        with open(path, "w") as f:
            json.dump(header, f, sort_keys=True)


def load_model(path) -> LinearConceptModel:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic == _MODEL_MAGIC:
            (header_len,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(header_len).decode())
            c, d = header["n_concepts"], header["dim"]
            data = np.frombuffer(f.read(), dtype="<f8")
            if data.size != c * d + c:
                raise CorpusFormatError(f"{path}: truncated model payload")
            W = data[:c * d].reshape(c, d).copy()
            b = data[c * d:].copy()
        else:
            f.seek(0)
            header = json.loads(f.read().decode())
            W = np.asarray(header["W"], dtype=np.float64)
            b = np.asarray(header["b"], dtype=np.float64)
    return LinearConceptModel(W, b, ConceptVocabulary(header["vocabulary"]))
