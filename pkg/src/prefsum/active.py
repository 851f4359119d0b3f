"""Query-pair selection for preference elicitation.

Concepts are first grouped by a correlation-clustering partition driven by
pairwise co-reference probabilities (a logistic model over surface
similarity features).  The default heuristic then queries diverse
cross-partition pairs early and anneals toward similar pairs as the budget
is spent.  Six baseline strategies (random, uncertainty, expected model
change, query-by-committee, conformal, bandit) share the same interface.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import preference
from .corpus import Concept, DocumentCluster, EmbeddingTable, content_tokens, stem
from .errors import ExhaustedError, ValidationError
from .preference import PreferenceRecord, UtilityModel, sigmoid

SIMILARITY_FEATURES = ("levenshtein", "jaccard", "embed_cos")

STRATEGIES = (
    "random",
    "uncertainty",
    "expected_model_change",
    "query_by_committee",
    "conformal",
    "bandit",
)

# Frozen output of fit_similarity_model() on the bundled synthetic
# co-reference pairs (see data/coref_train.json).
DEFAULT_THETA = (8.007, 8.126, 1.448)
DEFAULT_BIAS = -8.063

_EPSILON_GREEDY = 0.2
_COMMITTEE_SIZE = 5


def levenshtein(a: str, b: str) -> int:
    """Classic edit distance between two strings."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _stemmed_content(surface: str) -> frozenset:
    return frozenset(stem(t) for t in content_tokens(surface.split()))


def similarity_features(
    a: Concept,
    b: Concept,
    embeddings: Optional[EmbeddingTable] = None,
) -> np.ndarray:
    """[1 - normalized edit distance, stemmed-content Jaccard, embedding cosine]."""
    longest = max(len(a.surface), len(b.surface))
    lev = 1.0 if longest == 0 else 1.0 - levenshtein(a.surface, b.surface) / longest

    sa, sb = _stemmed_content(a.surface), _stemmed_content(b.surface)
    union = sa | sb
    jac = len(sa & sb) / len(union) if union else 0.0

    cos = 0.0
    if embeddings is not None:
        va = embeddings.mean_vector(a.tokens)
        vb = embeddings.mean_vector(b.tokens)
        if va is not None and vb is not None:
            denom = np.linalg.norm(va) * np.linalg.norm(vb)
            if denom > 0:
                cos = float(np.dot(va, vb) / denom)
    return np.array([lev, jac, min(max(cos, 0.0), 1.0)])


@dataclass(frozen=True)
class SimilarityModel:
    theta: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_THETA))
    bias: float = DEFAULT_BIAS
    form: str = "vector"  # "vector": sigmoid(theta . delta + bias)
    scalar_theta: float = 4.0  # "scalar": 1 / (1 + e^{theta (1 - z)}), z = mean(delta)

    def __post_init__(self):
        if not np.isfinite(self.theta).all() or not math.isfinite(self.bias):
            raise ValidationError("similarity model weights must be finite")
        if self.form not in ("vector", "scalar"):
            raise ValidationError(f"unknown similarity form {self.form!r}")


def coreference_probability(
    model: SimilarityModel,
    a: Concept,
    b: Concept,
    embeddings: Optional[EmbeddingTable] = None,
) -> float:
    delta = similarity_features(a, b, embeddings)
    if model.form == "scalar":
        z = float(np.mean(delta))
        return sigmoid(-model.scalar_theta * (1.0 - z))
    return sigmoid(float(np.dot(model.theta, delta)) + model.bias)


def fit_similarity_model(
    pairs: Sequence[Tuple[np.ndarray, int]],
    learning_rate: float = 0.5,
    epochs: int = 2000,
) -> SimilarityModel:
    """Logistic regression (with intercept) over similarity features."""
    if not pairs:
        raise ValidationError("no training pairs")
    theta = np.zeros(len(SIMILARITY_FEATURES))
    bias = 0.0
    for _ in range(epochs):
        grad_t = np.zeros_like(theta)
        grad_b = 0.0
        for delta, label in pairs:
            h = sigmoid(float(np.dot(theta, delta)) + bias)
            grad_t += (label - h) * delta
            grad_b += label - h
        theta += learning_rate * grad_t / len(pairs)
        bias += learning_rate * grad_b / len(pairs)
    return SimilarityModel(theta=theta, bias=bias)


def pairwise_probabilities(
    cluster: DocumentCluster,
    model: Optional[SimilarityModel] = None,
    embeddings: Optional[EmbeddingTable] = None,
) -> Dict[Tuple[int, int], float]:
    """Co-reference probability for every unordered concept pair."""
    model = model or SimilarityModel()
    probs = {}
    for a, b in itertools.combinations(cluster.concepts, 2):
        probs[(a.id, b.id)] = coreference_probability(model, a, b, embeddings)
    return probs


def _pair_key(i: int, j: int) -> Tuple[int, int]:
    return (i, j) if i < j else (j, i)


def _prob(probs: Mapping, i: int, j: int) -> float:
    return probs[_pair_key(i, j)]


@dataclass
class Partition:
    assignment: Dict[int, int]
    objective: float = 0.0

    def coref(self, i: int, j: int) -> bool:
        return self.assignment[i] == self.assignment[j]

    def labels(self) -> set:
        return set(self.assignment.values())

    def members(self, label: int) -> list:
        return sorted(i for i, lab in self.assignment.items() if lab == label)


def partition_objective(assignment: Mapping[int, int], probs: Mapping) -> float:
    """Agreement score: sum of p for within-cluster pairs, 1-p for split pairs."""
    total = 0.0
    ids = sorted(assignment)
    for i, j in itertools.combinations(ids, 2):
        p = _prob(probs, i, j)
        total += p if assignment[i] == assignment[j] else 1.0 - p
    return total


def partition_concepts(
    probs: Mapping,
    ids: Optional[Sequence[int]] = None,
    max_iters: int = 200,
    seed: int = 0,
    restarts: int = 3,
) -> Partition:
    """Greedy local search for the transitive partition maximizing agreement.

    Moves: relabel one concept into another cluster, split one concept into
    a fresh singleton, merge two clusters.  The best of `restarts` seeded
    starts is returned; labels are canonicalized by smallest member id.
    """
    if ids is None:
        ids = sorted({i for key in probs for i in key})
    ids = list(ids)
    if not ids:
        raise ValidationError("cannot partition an empty concept set")
    index = {cid: k for k, cid in enumerate(ids)}
    n = len(ids)
    # gain[i][j] = 2 p_ij - 1: objective delta of co-clustering i with j
    gain = np.zeros((n, n))
    for (i, j), p in probs.items():
        if i in index and j in index:
            gain[index[i], index[j]] = gain[index[j], index[i]] = 2.0 * p - 1.0

    best_labels = None
    best_obj = -math.inf
    for restart in range(max(restarts, 1)):
        rng = random.Random(seed * 7919 + restart)
        if restart == 0:
            labels = list(range(n))  # all singletons
        elif restart == 1:
            labels = [0] * n  # one cluster
        else:
            labels = [rng.randrange(n) for _ in range(n)]
        labels, obj = _local_search(labels, gain, rng, max_iters)
        if obj > best_obj + 1e-12 or best_labels is None:
            best_obj, best_labels = obj, labels

    # canonical labels: cluster label = smallest concept id inside it
    groups: Dict[int, list] = {}
    for k, lab in enumerate(best_labels):
        groups.setdefault(lab, []).append(ids[k])
    assignment = {}
    for members in groups.values():
        root = min(members)
        for cid in members:
            assignment[cid] = root
    return Partition(assignment=assignment, objective=partition_objective(assignment, probs))


def _local_search(labels, gain, rng, max_iters):
    n = len(labels)
    labels = list(labels)

    def same_cluster_gain():
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                if labels[i] == labels[j]:
                    total += gain[i, j]
        return total

    current = same_cluster_gain()
    for _ in range(max_iters):
        improved = False
        order = list(range(n))
        rng.shuffle(order)
        # single-concept moves: relabel into any cluster or a fresh singleton
        for i in order:
            attach = {}
            for j in range(n):
                if j != i:
                    attach[labels[j]] = attach.get(labels[j], 0.0) + gain[i, j]
            current_attach = attach.get(labels[i], 0.0)
            fresh = max(set(labels)) + 1
            candidates = list(attach.items()) + [(fresh, 0.0)]
            best_lab, best_gain = max(candidates, key=lambda kv: (kv[1], -kv[0]))
            if best_gain > current_attach + 1e-12:
                labels[i] = best_lab
                current += best_gain - current_attach
                improved = True
        # merge moves
        unique = sorted(set(labels))
        merge_best = None
        for a, b in itertools.combinations(unique, 2):
            delta = sum(
                gain[i, j]
                for i in range(n)
                if labels[i] == a
                for j in range(n)
                if labels[j] == b
            )
            if delta > 1e-12 and (merge_best is None or delta > merge_best[2]):
                merge_best = (a, b, delta)
        if merge_best is not None:
            a, b, delta = merge_best
            for i in range(n):
                if labels[i] == b:
                    labels[i] = a
            current += delta
            improved = True
        if not improved:
            break
    # `current` omits the constant sum of (1-p) over all pairs, which does
    # not affect the argmax across restarts
    return labels, current


@dataclass
class QueryState:
    budget: int
    asked: set = field(default_factory=set)
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.budget < 1:
            raise ValidationError(f"query budget must be >= 1, got {self.budget}")

    @property
    def round(self) -> int:
        return len(self.history)

    def remaining(self) -> int:
        return self.budget - len(self.asked)

    def record_answer(self, record: PreferenceRecord):
        self.history.append(record)


def _unasked_pairs(ids: Sequence[int], asked: set) -> list:
    return [
        (i, j)
        for i, j in itertools.combinations(sorted(ids), 2)
        if (i, j) not in asked
    ]


def pair_similarity(pair_a: Tuple[int, int], pair_b: Tuple[int, int], probs: Mapping) -> float:
    """Similarity between two query pairs: shared endpoint counts as 1."""
    if set(pair_a) & set(pair_b):
        return 1.0
    return max(_prob(probs, i, j) for i in pair_a for j in pair_b)


def next_query_heuristic(
    state: QueryState,
    partition: Partition,
    probs: Mapping,
    overlap_weight: float = 0.5,
) -> Tuple[int, int]:
    """Pick the next cross-partition pair, annealing diverse -> similar.

    Round i of budget t targets the i/t quantile of the co-reference
    probability distribution over unasked cross-partition pairs (quantile 0
    being the most diverse pair), breaking toward pairs least similar to
    anything already asked.
    """
    if state.remaining() <= 0:
        raise ExhaustedError("query budget exhausted")
    ids = sorted(partition.assignment)
    if len(ids) < 2:
        raise ValidationError("need at least two concepts to query")
    unasked = _unasked_pairs(ids, state.asked)
    if not unasked:
        raise ExhaustedError("all candidate pairs have been asked")
    cross = [(i, j) for i, j in unasked if not partition.coref(i, j)]
    candidates = cross or unasked

    values = sorted(_prob(probs, i, j) for i, j in candidates)
    quantile = min(len(state.asked) / state.budget, 1.0)
    target = values[min(int(quantile * len(values)), len(values) - 1)]

    def score(pair):
        p = _prob(probs, *pair)
        overlap = 0.0
        if state.asked:
            overlap = max(pair_similarity(pair, prev, probs) for prev in state.asked)
        return (abs(p - target) + overlap_weight * overlap, pair)

    best = min(candidates, key=score)
    state.asked.add(best)
    return best


def _committee_disagreement(models, features, pair) -> float:
    i, j = pair
    delta = features[i] - features[j]
    probs = [sigmoid(float(np.dot(m, delta))) for m in models]
    return float(np.var(probs))


class QuerySelector:
    """Shared machinery for the baseline strategies over one cluster."""

    def __init__(
        self,
        cluster: DocumentCluster,
        probs: Optional[Mapping] = None,
        partition: Optional[Partition] = None,
        similarity: Optional[SimilarityModel] = None,
        embeddings: Optional[EmbeddingTable] = None,
    ):
        self.cluster = cluster
        self.similarity = similarity or SimilarityModel()
        self.embeddings = embeddings
        self._probs = probs
        self._partition = partition

    @property
    def probs(self) -> Mapping:
        if self._probs is None:
            self._probs = pairwise_probabilities(self.cluster, self.similarity, self.embeddings)
        return self._probs

    @property
    def partition(self) -> Partition:
        if self._partition is None:
            self._partition = partition_concepts(
                self.probs, ids=[c.id for c in self.cluster.concepts]
            )
        return self._partition

    def next_pair(
        self,
        name: str,
        state: QueryState,
        model: UtilityModel,
        seed: int,
    ) -> Tuple[int, int]:
        if name == "heuristic":
            return next_query_heuristic(state, self.partition, self.probs)
        if name not in STRATEGIES:
            raise ValidationError(f"unknown strategy {name!r}")
        if state.remaining() <= 0:
            raise ExhaustedError("query budget exhausted")
        ids = [c.id for c in self.cluster.concepts]
        unasked = _unasked_pairs(ids, state.asked)
        if not unasked:
            raise ExhaustedError("all candidate pairs have been asked")
        rng = random.Random(seed * 1_000_003 + state.round)
        features = np.vstack([c.features for c in self.cluster.concepts])

        picker = getattr(self, f"_pick_{name}")
        pair = picker(state, model, unasked, features, rng)
        state.asked.add(pair)
        return pair

    def _pick_random(self, state, model, unasked, features, rng):
        return unasked[rng.randrange(len(unasked))]

    def _pick_uncertainty(self, state, model, unasked, features, rng):
        def margin(pair):
            i, j = pair
            h = sigmoid(float(np.dot(model.weights, features[i] - features[j])))
            return abs(h - 0.5)
        best = min(margin(p) for p in unasked)
        ties = [p for p in unasked if margin(p) <= best + 1e-12]
        return ties[rng.randrange(len(ties))]

    def _pick_expected_model_change(self, state, model, unasked, features, rng):
        def change(pair):
            i, j = pair
            delta = features[i] - features[j]
            h = sigmoid(float(np.dot(model.weights, delta)))
            predicted = 1 if h >= 0.5 else 0
            return abs(predicted - h) * float(np.linalg.norm(delta))
        best = max(change(p) for p in unasked)
        ties = [p for p in unasked if change(p) >= best - 1e-12]
        return ties[rng.randrange(len(ties))]

    def _pick_query_by_committee(self, state, model, unasked, features, rng):
        members = []
        for k in range(_COMMITTEE_SIZE):
            if state.history:
                sample = [
                    state.history[rng.randrange(len(state.history))]
                    for _ in range(len(state.history))
                ]
                fitted = preference.fit(
                    UtilityModel.zeros(features.shape[1], model.learning_rate, model.epochs),
                    sample,
                    self.cluster,
                    seed=seed_mix(rng.randrange(1 << 30), k),
                )
                members.append(fitted.weights)
            else:
                members.append(np.zeros(features.shape[1]))
        best = max(_committee_disagreement(members, features, p) for p in unasked)
        ties = [
            p for p in unasked
            if _committee_disagreement(members, features, p) >= best - 1e-12
        ]
        return ties[rng.randrange(len(ties))]

    def _pick_conformal(self, state, model, unasked, features, rng):
        if not state.asked:
            return unasked[rng.randrange(len(unasked))]

        def pair_vec(pair):
            return features[pair[0]] + features[pair[1]]

        asked_vecs = [pair_vec(p) for p in state.asked]

        def closeness(pair):
            v = pair_vec(pair)
            nv = np.linalg.norm(v)
            if nv == 0:
                return 1.0
            sims = []
            for u in asked_vecs:
                nu = np.linalg.norm(u)
                sims.append(float(np.dot(u, v) / (nu * nv)) if nu > 0 else 1.0)
            return max(sims)
        best = min(closeness(p) for p in unasked)
        ties = [p for p in unasked if closeness(p) <= best + 1e-12]
        return ties[rng.randrange(len(ties))]

    def _pick_bandit(self, state, model, unasked, features, rng):
        assignment = self.partition.assignment

        def arm(pair):
            return _pair_key(assignment[pair[0]], assignment[pair[1]])

        arms: Dict[Tuple[int, int], list] = {}
        for pair in unasked:
            arms.setdefault(arm(pair), []).append(pair)
        # historical information gain: how surprising past answers from the
        # arm are under the current model
        gains: Dict[Tuple[int, int], list] = {}
        for rec in state.history:
            key = arm((rec.left_id, rec.right_id))
            h = sigmoid(float(np.dot(model.weights, features[rec.left_id] - features[rec.right_id])))
            gains.setdefault(key, []).append(abs(rec.label - h))

        def arm_score(key):
            past = gains.get(key)
            return float(np.mean(past)) if past else 1.0

        keys = sorted(arms)
        if rng.random() < _EPSILON_GREEDY:
            chosen = keys[rng.randrange(len(keys))]
        else:
            best = max(arm_score(k) for k in keys)
            ties = [k for k in keys if arm_score(k) >= best - 1e-12]
            chosen = ties[rng.randrange(len(ties))]
        pairs = sorted(arms[chosen])
        return pairs[rng.randrange(len(pairs))]


def seed_mix(seed: int, salt: int) -> int:
    return (seed * 1_000_003 + salt * 7919) & 0x7FFFFFFF


def next_query_strategy(
    name: str,
    state: QueryState,
    model: UtilityModel,
    cluster: DocumentCluster,
    seed: int,
    selector: Optional[QuerySelector] = None,
) -> Tuple[int, int]:
    """One-shot strategy dispatch; see QuerySelector for reusable state."""
    selector = selector or QuerySelector(cluster)
    return selector.next_pair(name, state, model, seed)
