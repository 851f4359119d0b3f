"""Episodic policy learning over candidate summaries.

The default mode treats the summary pool as the action set: a linear value
q(y) = w . lam(y) is learned by temporal-difference updates from the
terminal reward, with softmax action selection whose temperature anneals
linearly over training.  A sequential mode builds a draft summary sentence
by sentence (add or terminate) with the same linear learner, for use when
no pool is available.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Tuple

import numpy as np

from .corpus import DocumentCluster
from .errors import StageError, ValidationError
from .reward import RewardModel, summary_features
from .sumgen import Summary, SummaryPool, _make_summary, _sentence_concepts

TERMINATE = -1


@dataclass(frozen=True)
class PolicyModel:
    weights: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")

    def to_json(self) -> dict:
        return {
            "version": 1,
            "kind": "policy",
            "weights": [float(w) for w in self.weights],
            "temperature": self.temperature,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PolicyModel":
        if data.get("kind") != "policy":
            raise ValidationError("not a serialized policy model")
        return cls(np.array(data["weights"], dtype=float), data["temperature"])


@dataclass(frozen=True)
class DraftState:
    chosen_sentence_ids: Tuple[int, ...] = ()
    remaining_budget: int = 0
    terminated: bool = False


def actions(state: DraftState, cluster: DocumentCluster) -> list:
    """TERMINATE plus every unused sentence that fits the remaining budget."""
    if state.terminated:
        raise StageError("terminated states admit no actions")
    used = set(state.chosen_sentence_ids)
    acts = [TERMINATE]
    for sent in cluster.sentences:
        if sent.index_in_cluster in used:
            continue
        if sent.length <= state.remaining_budget:
            acts.append(sent.index_in_cluster)
    return acts


def episode_reward(
    state: DraftState,
    reward_model: RewardModel,
    cluster: DocumentCluster,
    weights: Optional[Mapping[int, float]] = None,
    refs=None,
) -> float:
    """Learned value of the induced summary at termination, else 0."""
    if not state.terminated:
        return 0.0
    summary = draft_to_summary(state, cluster, weights or {})
    return reward_model.value(summary_features(summary, cluster, refs))


def draft_to_summary(state: DraftState, cluster: DocumentCluster, weights) -> Summary:
    sent_concepts = _sentence_concepts(cluster)
    return _make_summary(cluster, state.chosen_sentence_ids, sent_concepts, weights)


def softmax(values: np.ndarray, temperature: float) -> np.ndarray:
    scaled = values / temperature
    scaled -= scaled.max()
    expd = np.exp(scaled)
    return expd / expd.sum()


@dataclass
class TrainingCurve:
    episodes: list = field(default_factory=list)
    greedy_values: list = field(default_factory=list)

    def rows(self) -> list:
        return [
            {"episode": e, "greedy_value": v}
            for e, v in zip(self.episodes, self.greedy_values)
        ]


def arm_features(pool_features: Mapping[int, np.ndarray], size: int) -> dict:
    """Summary features with an identity block appended per pool member.

    The identity block makes the linear value exactly representable over
    the pool, so the greedy policy can always realize the argmax.
    """
    eye = np.eye(size)
    return {
        i: np.concatenate([pool_features[i], eye[i]]) for i in range(size)
    }


def train_policy(
    cluster: DocumentCluster,
    pool: SummaryPool,
    reward_model: Optional[RewardModel],
    episodes: int,
    seed: int,
    learning_rate: float = 0.01,
    temperature_start: float = 1.0,
    temperature_end: float = 0.1,
    features: Optional[Mapping[int, np.ndarray]] = None,
    reward_fn: Optional[Callable[[int], float]] = None,
    checkpoints: int = 10,
) -> tuple:
    """Pool-restricted TD learning; returns (model, training curve).

    Rewards come from `reward_fn(pool_index)` when given, otherwise from
    the reward model applied to summary features.
    """
    if episodes < 1:
        raise ValidationError("episodes must be >= 1")
    if len(pool) == 0:
        raise ValidationError("cannot train a policy on an empty pool")
    if features is None:
        features = {
            i: summary_features(pool[i], cluster) for i in range(len(pool))
        }
    if reward_fn is None:
        if reward_model is None:
            raise ValidationError("need a reward model or reward function")
        reward_fn = lambda i: reward_model.value(features[i])

    matrix = np.vstack([features[i] for i in range(len(pool))])
    weights = np.zeros(matrix.shape[1])
    rng = np.random.default_rng(seed)
    curve = TrainingCurve()
    checkpoint_every = max(episodes // max(checkpoints, 1), 1)

    for episode in range(episodes):
        frac = episode / max(episodes - 1, 1)
        temperature = temperature_start + (temperature_end - temperature_start) * frac
        q = matrix @ weights
        probs = softmax(q, temperature)
        # inverse-CDF draw; rng.choice(p=...) is too slow at this call rate
        arm = min(int(np.searchsorted(np.cumsum(probs), rng.random())), len(probs) - 1)
        target = reward_fn(arm)
        delta = target - q[arm]
        weights += learning_rate * delta * matrix[arm]
        if (episode + 1) % checkpoint_every == 0 or episode == episodes - 1:
            greedy = int(np.argmax(matrix @ weights))
            curve.episodes.append(episode + 1)
            curve.greedy_values.append(float(reward_fn(greedy)))

    model = PolicyModel(weights=weights, temperature=temperature_end)
    return model, curve


def pool_distribution(model: PolicyModel, features: Mapping[int, np.ndarray], size: int) -> np.ndarray:
    q = np.array([float(np.dot(model.weights, features[i])) for i in range(size)])
    return softmax(q, model.temperature)


def best_summary(
    model: PolicyModel,
    cluster: DocumentCluster,
    pool: SummaryPool,
    features: Optional[Mapping[int, np.ndarray]] = None,
) -> Summary:
    """Greedy pool argmax under the learned value; ties to the lowest index."""
    if len(pool) == 0:
        raise ValidationError("empty pool")
    if features is None:
        features = {i: summary_features(pool[i], cluster) for i in range(len(pool))}
    values = [float(np.dot(model.weights, features[i])) for i in range(len(pool))]
    best_idx = int(np.argmax(values))
    return pool[best_idx]


def train_policy_sequential(
    cluster: DocumentCluster,
    reward_model: RewardModel,
    L: int,
    episodes: int,
    seed: int,
    weights_map: Optional[Mapping[int, float]] = None,
    learning_rate: float = 0.01,
    temperature_start: float = 1.0,
    temperature_end: float = 0.1,
) -> tuple:
    """Sequential draft-building TD learner.

    State-action features are the feature vector of the draft after the
    action plus the action's marginal concept-weight gain; only the
    terminal reward propagates (discount 1).
    """
    if episodes < 1:
        raise ValidationError("episodes must be >= 1")
    if not cluster.sentences:
        raise ValidationError("cluster has no sentences")
    weights_map = weights_map or {}
    sent_concepts = _sentence_concepts(cluster)
    n_feat = len(summary_feature_vector(cluster, (), weights_map, sent_concepts))
    w = np.zeros(n_feat)
    rng = np.random.default_rng(seed)
    curve = TrainingCurve()
    checkpoint_every = max(episodes // 10, 1)

    for episode in range(episodes):
        frac = episode / max(episodes - 1, 1)
        temperature = temperature_start + (temperature_end - temperature_start) * frac
        state = DraftState(remaining_budget=L - 1)
        visited = []
        while not state.terminated:
            acts = actions(state, cluster)
            feats = [
                summary_feature_vector(
                    cluster, _after(state, a, cluster).chosen_sentence_ids,
                    weights_map, sent_concepts, action=a, state=state,
                )
                for a in acts
            ]
            q = np.array([float(np.dot(w, f)) for f in feats])
            probs = softmax(q, temperature)
            pick = int(rng.choice(len(acts), p=probs))
            visited.append(feats[pick])
            state = _after(state, acts[pick], cluster)
        summary = draft_to_summary(state, cluster, weights_map)
        reward = reward_model.value(summary_features(summary, cluster))
        for f in visited:
            w += learning_rate * (reward - float(np.dot(w, f))) * f
        if (episode + 1) % checkpoint_every == 0 or episode == episodes - 1:
            curve.episodes.append(episode + 1)
            curve.greedy_values.append(reward)
    return PolicyModel(weights=w, temperature=temperature_end), curve


def _after(state: DraftState, action: int, cluster: DocumentCluster) -> DraftState:
    if action == TERMINATE:
        return replace(state, terminated=True)
    return DraftState(
        chosen_sentence_ids=state.chosen_sentence_ids + (action,),
        remaining_budget=state.remaining_budget - cluster.sentences[action].length,
        terminated=False,
    )


def summary_feature_vector(cluster, sentence_ids, weights_map, sent_concepts, action=None, state=None):
    summary = _make_summary(cluster, sentence_ids, sent_concepts, weights_map)
    base = summary_features(summary, cluster)
    gain = 0.0
    if action is not None and action != TERMINATE and state is not None:
        covered = set()
        for sid in state.chosen_sentence_ids:
            covered |= sent_concepts[sid]
        gain = sum(
            weights_map.get(cid, 0.0)
            for cid in sent_concepts[action]
            if cid not in covered
        )
    return np.concatenate([base, [gain]])


def save_policy(model: PolicyModel, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model.to_json(), handle, indent=2, sort_keys=True)


def load_policy(path) -> PolicyModel:
    with open(path, encoding="utf-8") as handle:
        return PolicyModel.from_json(json.load(handle))
