"""Concept utility learning from pairwise preferences (Bradley-Terry).

A linear utility u(c) = w . phi(c) is fit by stochastic gradient ascent on
the log-likelihood of observed preferences, where the probability that
concept a beats concept b is the logistic of u(a) - u(b).  The ranking
derived from the fitted utilities counts, for each concept, how many other
concepts it beats; ties break by concept id ascending.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import Concept, DocumentCluster, feature_matrix
from .errors import ValidationError

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class PreferenceRecord:
    left_id: int
    right_id: int
    label: int  # 1 if left preferred, else 0
    round: int = 0

    def __post_init__(self):
        if self.left_id == self.right_id:
            raise ValidationError("preference pair must contain two distinct ids")
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class UtilityModel:
    weights: np.ndarray
    learning_rate: float = 0.001
    epochs: int = 50

    @classmethod
    def zeros(cls, n_features: int, learning_rate: float = 0.001, epochs: int = 50):
        return cls(np.zeros(n_features), learning_rate, epochs)

    def to_json(self, feature_names: Sequence[str]) -> dict:
        return {
            "version": 1,
            "kind": "utility",
            "feature_names": list(feature_names),
            "weights": [float(w) for w in self.weights],
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "UtilityModel":
        if data.get("kind") != "utility":
            raise ValidationError("not a serialized utility model")
        return cls(
            weights=np.array(data["weights"], dtype=float),
            learning_rate=data["learning_rate"],
            epochs=data["epochs"],
        )


def _check_schema(model: UtilityModel, concept: Concept) -> np.ndarray:
    if concept.features is None:
        raise ValidationError("concept has no feature vector")
    if concept.features.shape != model.weights.shape:
        raise ValidationError(
            f"feature schema mismatch: {concept.features.shape} vs {model.weights.shape}"
        )
    return concept.features


def utility(model: UtilityModel, concept: Concept) -> float:
    return float(np.dot(model.weights, _check_schema(model, concept)))


def sigmoid(z: float) -> float:
    z = max(min(z, 50.0), -50.0)
    return 1.0 / (1.0 + math.exp(-z))


def preference_probability(model: UtilityModel, a: Concept, b: Concept) -> float:
    """Probability that a is preferred to b: logistic of u(a) - u(b)."""
    return sigmoid(utility(model, a) - utility(model, b))


def log_likelihood_and_gradient(
    weights: np.ndarray,
    prefs: Sequence[PreferenceRecord],
    features: np.ndarray,
) -> tuple:
    """Full-batch preference log-likelihood and its gradient in w.

    Probabilities are clamped away from 0 and 1 before the log.
    """
    total = 0.0
    grad = np.zeros_like(weights)
    for rec in prefs:
        delta = features[rec.left_id] - features[rec.right_id]
        h = sigmoid(float(np.dot(weights, delta)))
        h = min(max(h, PROB_CLAMP), 1 - PROB_CLAMP)
        p = rec.label
        total += p * math.log(h) + (1 - p) * math.log(1 - h)
        grad += (p - h) * delta
    return total, grad


def fit(
    model: UtilityModel,
    prefs: Sequence[PreferenceRecord],
    cluster: DocumentCluster,
    seed: int = 0,
    epochs: Optional[int] = None,
) -> UtilityModel:
    """Stochastic gradient ascent over shuffled preference records."""
    if not prefs:
        raise ValidationError("cannot fit on an empty preference set")
    features = feature_matrix(cluster)
    n = len(cluster.concepts)
    for rec in prefs:
        if not (0 <= rec.left_id < n and 0 <= rec.right_id < n):
            raise ValidationError(f"preference references unknown concept: {rec}")

    weights = model.weights.copy()
    rng = random.Random(seed)
    order = list(range(len(prefs)))
    for _ in range(epochs if epochs is not None else model.epochs):
        rng.shuffle(order)
        for idx in order:
            rec = prefs[idx]
            delta = features[rec.left_id] - features[rec.right_id]
            h = sigmoid(float(np.dot(weights, delta)))
            weights += model.learning_rate * (rec.label - h) * delta
    return replace(model, weights=weights)


def utilities(model: UtilityModel, cluster: DocumentCluster) -> np.ndarray:
    return feature_matrix(cluster) @ model.weights


def rank(model: UtilityModel, cluster: DocumentCluster) -> dict:
    """Map concept id -> number of concepts it beats; ties by id ascending."""
    values = utilities(model, cluster)
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    return {cid: position for position, cid in enumerate(order)}
