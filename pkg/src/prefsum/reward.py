"""Summary reward learning from expert judgments.

A linear value v(y) = w . lam(y) over aggregate summary features is fit
either by mean-squared-error regression on point scores or by pairwise
cross-entropy on summary preferences.  Query summaries are chosen by
greedy max-min diversity in feature space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .corpus import DocumentCluster, FEATURE_NAMES
from .errors import ValidationError
from .preference import PreferenceRecord, sigmoid
from .rouge import rouge_n
from .sumgen import Summary, SummaryPool, redundancy

REWARD_MODES = ("point", "pairwise")
L2_COEFFICIENT = 1e-4


def summary_feature_names(concept_features: Sequence[str] = FEATURE_NAMES) -> tuple:
    names = []
    for f in concept_features:
        names.append(f"mean_{f}")
    for f in concept_features:
        names.append(f"max_{f}")
    names += ["length_ratio", "redundancy", "rouge1", "rouge2"]
    return tuple(names)


def summary_features(
    summary: Summary,
    cluster: DocumentCluster,
    refs: Optional[Sequence[Sequence[str]]] = None,
    preferred: Sequence[int] = (),
) -> np.ndarray:
    """Mean/max aggregates of member-concept features, plus summary-level
    length ratio, redundancy, and ROUGE-1/2 (zeros without references).

    Concept features are first averaged within each member sentence, then
    aggregated across sentences, so a one-sentence summary has identical
    mean and max parts.
    """
    n_feat = len(cluster.feature_names)
    sentence_rows = []
    for sid in summary.sentence_ids:
        cids = sorted(cid for cid in summary.concept_cover
                      if sid in cluster.concepts[cid].sentence_ids)
        if cids:
            sentence_rows.append(
                np.vstack([cluster.concepts[cid].features for cid in cids]).mean(axis=0)
            )
        else:
            sentence_rows.append(np.zeros(n_feat))
    if sentence_rows:
        rows = np.vstack(sentence_rows)
        mean_part, max_part = rows.mean(axis=0), rows.max(axis=0)
    else:
        mean_part = np.zeros(n_feat)
        max_part = np.zeros(n_feat)
    total_tokens = sum(s.length for s in cluster.sentences)
    ratio = summary.length / total_tokens if total_tokens else 0.0
    red = redundancy(summary, cluster, preferred) if summary.sentence_ids else 0.0
    if refs:
        tokens = summary.tokens(cluster)
        r1 = rouge_n(tokens, refs, 1)
        r2 = rouge_n(tokens, refs, 2)
    else:
        r1 = r2 = 0.0
    return np.concatenate([mean_part, max_part, [ratio, red, r1, r2]])


@dataclass(frozen=True)
class RewardModel:
    weights: np.ndarray
    mode: str = "pairwise"
    learning_rate: float = 0.005
    l2: float = L2_COEFFICIENT

    def __post_init__(self):
        if self.mode not in REWARD_MODES:
            raise ValidationError(f"unknown reward mode {self.mode!r}")

    @classmethod
    def zeros(cls, n_features: int, mode: str = "pairwise", learning_rate: float = 0.005):
        return cls(np.zeros(n_features), mode, learning_rate)

    def value(self, features: np.ndarray) -> float:
        if features.shape != self.weights.shape:
            raise ValidationError(
                f"summary feature schema mismatch: {features.shape} vs {self.weights.shape}"
            )
        return float(np.dot(self.weights, features))

    def to_json(self) -> dict:
        return {
            "version": 1,
            "kind": "reward",
            "mode": self.mode,
            "weights": [float(w) for w in self.weights],
            "learning_rate": self.learning_rate,
            "l2": self.l2,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "RewardModel":
        if data.get("kind") != "reward":
            raise ValidationError("not a serialized reward model")
        return cls(
            weights=np.array(data["weights"], dtype=float),
            mode=data["mode"],
            learning_rate=data["learning_rate"],
            l2=data.get("l2", L2_COEFFICIENT),
        )


def mse_and_gradient(
    weights: np.ndarray,
    samples: Sequence[Tuple[np.ndarray, float]],
    l2: float = L2_COEFFICIENT,
) -> tuple:
    """Mean squared error (plus L2 penalty) and its gradient."""
    if not samples:
        raise ValidationError("no samples")
    total = 0.0
    grad = np.zeros_like(weights)
    for features, score in samples:
        err = float(np.dot(weights, features)) - score
        total += err * err
        grad += 2.0 * err * features
    n = len(samples)
    total = total / n + l2 * float(np.dot(weights, weights))
    grad = grad / n + 2.0 * l2 * weights
    return total, grad


def cross_entropy_and_gradient(
    weights: np.ndarray,
    prefs: Sequence[Tuple[np.ndarray, np.ndarray, int]],
    l2: float = L2_COEFFICIENT,
) -> tuple:
    """Pairwise cross-entropy loss (plus L2 penalty) and its gradient.

    Each item is (features_left, features_right, label) with label 1 when
    the left summary is preferred.
    """
    if not prefs:
        raise ValidationError("no preferences")
    total = 0.0
    grad = np.zeros_like(weights)
    for left, right, label in prefs:
        delta = left - right
        h = sigmoid(float(np.dot(weights, delta)))
        h = min(max(h, 1e-12), 1 - 1e-12)
        total -= label * math.log(h) + (1 - label) * math.log(1 - h)
        grad -= (label - h) * delta
    total += l2 * float(np.dot(weights, weights))
    grad += 2.0 * l2 * weights
    return total, grad


def fit_point(
    model: RewardModel,
    samples: Sequence[Tuple[np.ndarray, float]],
    iterations: int = 2000,
) -> RewardModel:
    """Full-batch gradient descent on the MSE loss."""
    if not samples:
        raise ValidationError("cannot fit on an empty sample set")
    weights = model.weights.copy()
    for _ in range(iterations):
        _, grad = mse_and_gradient(weights, samples, model.l2)
        weights -= model.learning_rate * grad
    return replace(model, weights=weights)


def fit_pairwise(
    model: RewardModel,
    prefs: Sequence[PreferenceRecord],
    features: Mapping[int, np.ndarray],
    epochs: int = 300,
) -> RewardModel:
    """Full-batch gradient descent on the pairwise cross-entropy loss.

    `features` maps summary ids (pool indices) to feature vectors.
    """
    if not prefs:
        raise ValidationError("cannot fit on an empty preference set")
    triples = [(features[p.left_id], features[p.right_id], p.label) for p in prefs]
    weights = model.weights.copy()
    for _ in range(epochs):
        _, grad = cross_entropy_and_gradient(weights, triples, model.l2)
        weights -= model.learning_rate * grad
    return replace(model, weights=weights)


def select_query_summaries(
    pool: SummaryPool,
    asked: Sequence[int],
    k: int,
    features: Mapping[int, np.ndarray],
) -> list:
    """Greedy max-min diversity pick of k pool indices.

    The first pick (with no history) is the pool's top-scoring summary;
    afterwards each pick maximizes the minimum Euclidean distance to
    everything already selected or previously asked.
    """
    if k > len(pool):
        raise ValidationError(f"cannot select {k} summaries from a pool of {len(pool)}")
    chosen: list = []
    anchors = list(asked)
    remaining = [i for i in range(len(pool)) if i not in set(anchors)]
    while len(chosen) < k:
        if not remaining:
            raise ValidationError("pool exhausted during diversity selection")
        if not anchors and not chosen:
            pick = 0 if 0 in remaining else remaining[0]
        else:
            reference = [features[i] for i in anchors + chosen]

            def min_dist(idx):
                return min(float(np.linalg.norm(features[idx] - r)) for r in reference)

            best = max(min_dist(i) for i in remaining)
            pick = next(i for i in remaining if min_dist(i) >= best - 1e-12)
        chosen.append(pick)
        remaining.remove(pick)
    return chosen
