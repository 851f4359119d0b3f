"""The staged session engine and the offline simulated runner.

One engine implements the full interaction loop -- concept-preference
elicitation, pool construction, reward elicitation, policy training, final
summary -- and is driven either by the HTTP service (a human answering) or
by the offline runner (a simulated user and expert).  Everything the
engine does is a deterministic function of (cluster, config, seed, answer
sequence), which is what makes offline runs and scripted service sessions
byte-identical.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import active, policy as policy_mod, preference, reward as reward_mod, rouge
from .config import RunConfig
from .corpus import (
    DocumentCluster,
    EmbeddingTable,
    featurize_concepts,
    reference_tokens,
)
from .errors import ConflictError, StageError, ValidationError
from .preference import PreferenceRecord, UtilityModel
from .simulate import GroundTruthReward, GroundTruthUser, answer_preference, score_summary
from .sumgen import Summary, SummaryPool, build_pool, generate_optimal

STAGE_ELICIT = "elicitation"
STAGE_REWARD = "reward"
STAGE_FINAL = "final"


def derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{seed}/{tag}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def canonical_json(payload) -> str:
    """Stable serialization used for artifacts compared byte-for-byte."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class SessionEngine:
    """Stage machine for one summarization session."""

    def __init__(
        self,
        cluster: DocumentCluster,
        config: RunConfig,
        seed: int,
        embeddings: Optional[EmbeddingTable] = None,
    ):
        if cluster.concepts and cluster.concepts[0].features is None:
            cluster = featurize_concepts(cluster, embeddings)
        if cluster.unit != config.unit:
            raise ValidationError(
                f"cluster unit {cluster.unit!r} does not match config unit {config.unit!r}"
            )
        if len(cluster.concepts) < 2:
            raise ValidationError("need at least two concepts to elicit preferences")
        self.cluster = cluster
        self.config = config
        self.seed = seed
        self.embeddings = embeddings

        n_features = len(cluster.feature_names)
        self.feature_mask = None
        if config.feature_limit is not None:
            keep = min(config.feature_limit, n_features)
            self.feature_mask = np.zeros(n_features)
            self.feature_mask[:keep] = 1.0
            masked = self._masked_cluster(cluster)
            self.cluster = masked

        self.utility = UtilityModel.zeros(
            n_features,
            learning_rate=config.concept_learning_rate,
            epochs=config.epochs,
        )
        self.selector = active.QuerySelector(self.cluster, embeddings=embeddings)
        self.query_state = active.QueryState(budget=config.budget)
        self.current_pair: Optional[Tuple[int, int]] = None

        self.pool: Optional[SummaryPool] = None
        self.pool_features: Dict[int, np.ndarray] = {}
        self.reward_model: Optional[reward_mod.RewardModel] = None
        self.reward_history: List[PreferenceRecord] = []
        self.reward_asked: List[Tuple[int, int]] = []
        self.current_summary_pair: Optional[Tuple[int, int]] = None
        self.policy_model: Optional[policy_mod.PolicyModel] = None
        self.learning_curve = None
        self.final: Optional[Summary] = None
        self.rating: Optional[int] = None

        if config.ablation == "PR":
            # no preference learner: uniform weights, skip elicitation
            self.stage = STAGE_ELICIT
            self._advance_to_pool()
        else:
            self.stage = STAGE_ELICIT

    def _masked_cluster(self, cluster: DocumentCluster) -> DocumentCluster:
        import dataclasses as dc

        concepts = [
            dc.replace(c, features=c.features * self.feature_mask)
            for c in cluster.concepts
        ]
        out = DocumentCluster(
            id=cluster.id,
            documents=cluster.documents,
            sentences=cluster.sentences,
            concepts=concepts,
            unit=cluster.unit,
            references=cluster.references,
            feature_names=cluster.feature_names,
        )
        out._capitalized = getattr(cluster, "_capitalized", set())
        return out

    # ----- elicitation stage -----

    @property
    def round(self) -> int:
        return len(self.query_state.history)

    def current_query(self) -> Optional[Tuple[int, int]]:
        """The outstanding concept pair; stable until feedback arrives."""
        if self.stage != STAGE_ELICIT:
            raise StageError(f"no concept query in stage {self.stage}")
        if self.current_pair is not None:
            return self.current_pair
        if self.round >= self.config.budget:
            self._advance_to_pool()
            return None
        strategy = "random" if self.config.ablation == "AC" else self.config.strategy
        try:
            self.current_pair = self.selector.next_pair(
                strategy,
                self.query_state,
                self.utility,
                seed=derive_seed(self.seed, "query"),
            )
        except active.ExhaustedError:
            self._advance_to_pool()
            return None
        return self.current_pair

    def submit_feedback(self, left_id: int, right_id: int, label: int) -> None:
        if self.stage != STAGE_ELICIT:
            raise StageError(f"cannot accept concept feedback in stage {self.stage}")
        if self.current_pair is None:
            raise ConflictError("no outstanding query")
        if (left_id, right_id) != self.current_pair:
            raise ConflictError(
                f"feedback pair ({left_id}, {right_id}) does not match outstanding "
                f"query {self.current_pair}"
            )
        record = PreferenceRecord(left_id, right_id, label, round=self.round)
        self.query_state.record_answer(record)
        self.current_pair = None
        self._refit_utility()
        if self.round >= self.config.budget:
            self._advance_to_pool()

    def _refit_utility(self) -> None:
        epochs = self.config.epochs if self.config.full_retrain else 1
        start = (
            UtilityModel.zeros(
                len(self.cluster.feature_names),
                self.config.concept_learning_rate,
                self.config.epochs,
            )
            if self.config.full_retrain
            else self.utility
        )
        self.utility = preference.fit(
            start,
            self.query_state.history,
            self.cluster,
            seed=derive_seed(self.seed, f"refit/{self.round}"),
            epochs=epochs,
        )

    def concept_weights(self) -> Dict[int, float]:
        """Rank-normalized concept weights in (0, 1].

        weight_power > 1 concentrates mass on the top-ranked concepts.
        """
        if self.config.ablation == "PR":
            return {c.id: 1.0 for c in self.cluster.concepts}
        ranks = preference.rank(self.utility, self.cluster)
        n = len(self.cluster.concepts)
        power = self.config.weight_power
        return {cid: ((r + 1) / n) ** power for cid, r in ranks.items()}

    def preferred_concepts(self) -> frozenset:
        """Concepts the user picked as winners during elicitation."""
        winners = set()
        for rec in self.query_state.history:
            winners.add(rec.left_id if rec.label == 1 else rec.right_id)
        return frozenset(winners)

    def draft_summary(self) -> Summary:
        if not self.query_state.history and self.config.ablation != "PR":
            raise StageError("draft summary requires at least one answered query")
        return generate_optimal(
            self.cluster, self.concept_weights(), self.config.summary_length
        )

    # ----- pool + reward stage -----

    def _advance_to_pool(self) -> None:
        refs = reference_tokens(self.cluster) or None
        self.pool = build_pool(
            self.cluster,
            self.concept_weights(),
            self.config.summary_length,
            self.config.pool_size,
            self.config.redundancy_cap,
            preferred=self.preferred_concepts(),
            seed=derive_seed(self.seed, "pool"),
        )
        self.pool_features = {
            i: reward_mod.summary_features(
                self.pool[i], self.cluster, refs=refs,
                preferred=self.preferred_concepts(),
            )
            for i in range(len(self.pool))
        }
        self.reward_model = reward_mod.RewardModel.zeros(
            len(next(iter(self.pool_features.values()))),
            mode=self.config.reward_mode,
            learning_rate=self.config.reward_learning_rate,
        )
        if self.config.ablation == "GE" or len(self.pool) < 2:
            self.stage = STAGE_REWARD
            self._advance_to_final()
        else:
            self.stage = STAGE_REWARD

    @property
    def reward_round(self) -> int:
        return len(self.reward_history)

    def current_summary_query(self) -> Optional[Tuple[int, int]]:
        if self.stage != STAGE_REWARD:
            raise StageError(f"no summary query in stage {self.stage}")
        if self.current_summary_pair is not None:
            return self.current_summary_pair
        if self.reward_round >= self.config.reward_budget:
            self._advance_to_final()
            return None
        pair = self._select_summary_pair()
        if pair is None:
            self._advance_to_final()
            return None
        self.current_summary_pair = pair
        return pair

    def _select_summary_pair(self) -> Optional[Tuple[int, int]]:
        asked_members = sorted({i for pair in self.reward_asked for i in pair})
        if len(asked_members) + 2 <= len(self.pool):
            picks = reward_mod.select_query_summaries(
                self.pool, asked_members, 2, self.pool_features
            )
            pair = (min(picks), max(picks))
            if pair not in self.reward_asked:
                return pair
        for pair in itertools.combinations(range(len(self.pool)), 2):
            if pair not in self.reward_asked:
                return pair
        return None

    def submit_summary_feedback(self, left_idx: int, right_idx: int, label: int) -> None:
        if self.stage != STAGE_REWARD:
            raise StageError(f"cannot accept summary feedback in stage {self.stage}")
        if self.current_summary_pair is None:
            raise ConflictError("no outstanding summary query")
        if (left_idx, right_idx) != self.current_summary_pair:
            raise ConflictError(
                f"summary feedback ({left_idx}, {right_idx}) does not match "
                f"outstanding query {self.current_summary_pair}"
            )
        record = PreferenceRecord(left_idx, right_idx, label, round=self.reward_round)
        self.reward_history.append(record)
        self.reward_asked.append((left_idx, right_idx))
        self.current_summary_pair = None
        # warm-start single pass per answer keeps interaction latency low
        self.reward_model = reward_mod.fit_pairwise(
            self.reward_model, self.reward_history, self.pool_features, epochs=1
        )
        if self.reward_round >= self.config.reward_budget:
            self._advance_to_final()

    def submit_point_scores(self, scores: Dict[int, float]) -> None:
        """Point-mode alternative: fit on (summary, score) samples directly."""
        if self.stage != STAGE_REWARD:
            raise StageError(f"cannot accept point scores in stage {self.stage}")
        if self.config.reward_mode != "point":
            raise StageError("session is configured for pairwise reward feedback")
        samples = [(self.pool_features[i], float(v)) for i, v in sorted(scores.items())]
        self.reward_model = reward_mod.fit_point(self.reward_model, samples, iterations=2000)
        self._advance_to_final()

    def point_query_indices(self) -> List[int]:
        if self.config.reward_mode != "point":
            raise StageError("session is configured for pairwise reward feedback")
        k = min(self.config.reward_budget, len(self.pool))
        return reward_mod.select_query_summaries(self.pool, [], k, self.pool_features)

    # ----- policy + final -----

    def _advance_to_final(self) -> None:
        if self.stage != STAGE_REWARD:
            raise StageError("final stage reached out of order")
        if self.reward_history and self.config.reward_mode == "pairwise":
            self.reward_model = reward_mod.fit_pairwise(
                self.reward_model, self.reward_history, self.pool_features, epochs=300
            )
        if self.config.ablation == "GE":
            self.final = self.pool[0]
        else:
            # identity-augmented arm features keep the pool argmax exactly
            # representable; rewards still come from the learned model
            arms = policy_mod.arm_features(self.pool_features, len(self.pool))
            reward_model = self.reward_model

            def arm_reward(i: int) -> float:
                return reward_model.value(self.pool_features[i])

            self.policy_model, self.learning_curve = policy_mod.train_policy(
                self.cluster,
                self.pool,
                None,
                episodes=self.config.policy_episodes,
                seed=derive_seed(self.seed, "policy"),
                learning_rate=self.config.policy_learning_rate,
                temperature_start=self.config.temperature_start,
                temperature_end=self.config.temperature_end,
                features=arms,
                reward_fn=arm_reward,
            )
            self.final = policy_mod.best_summary(
                self.policy_model, self.cluster, self.pool, arms
            )
        self.stage = STAGE_FINAL

    def submit_rating(self, score: int) -> None:
        if self.stage != STAGE_FINAL:
            raise StageError("rating accepted only after the final summary")
        if not isinstance(score, int) or not 0 <= score <= 10:
            raise ValidationError(f"rating must be an integer in [0, 10], got {score!r}")
        self.rating = score

    def final_summary_json(self) -> dict:
        if self.final is None:
            raise StageError("final summary not available yet")
        return self.final.to_json(self.cluster)

    # ----- observability -----

    def snapshot(self) -> dict:
        """Observable state, used to verify crash-replay equivalence."""
        return {
            "stage": self.stage,
            "round": self.round,
            "current_pair": list(self.current_pair) if self.current_pair else None,
            "asked": sorted(list(p) for p in self.query_state.asked),
            "history": [
                [r.left_id, r.right_id, r.label, r.round]
                for r in self.query_state.history
            ],
            "utility_weights": [round(float(w), 12) for w in self.utility.weights],
            "pool": [list(s.sentence_ids) for s in self.pool] if self.pool else None,
            "reward_round": self.reward_round,
            "current_summary_pair": list(self.current_summary_pair)
            if self.current_summary_pair
            else None,
            "reward_history": [
                [r.left_id, r.right_id, r.label, r.round] for r in self.reward_history
            ],
            "reward_weights": [round(float(w), 12) for w in self.reward_model.weights]
            if self.reward_model is not None
            else None,
            "final": self.final.to_json(self.cluster) if self.final else None,
            "rating": self.rating,
        }


@dataclass
class SessionResult:
    final_summary: Summary
    final_json: dict
    rouge1: float
    rouge2: float
    rougeL: float
    ground_truth_value: float
    kendall_tau: Optional[float]
    rounds_used: int
    config: dict
    seed: int
    learning_curve: list = None

    def to_json(self) -> dict:
        return {
            "final_summary": self.final_json,
            "metrics": {
                "rouge1": self.rouge1,
                "rouge2": self.rouge2,
                "rougeL": self.rougeL,
                "ground_truth_value": self.ground_truth_value,
                "kendall_tau": self.kendall_tau,
                "rounds_used": self.rounds_used,
            },
            "config": self.config,
            "seed": self.seed,
        }


def kendall_tau(rank_a: Dict[int, int], rank_b: Dict[int, int]) -> float:
    ids = sorted(rank_a)
    concordant = discordant = 0
    for i, j in itertools.combinations(ids, 2):
        s1 = rank_a[i] - rank_a[j]
        s2 = rank_b[i] - rank_b[j]
        if s1 * s2 > 0:
            concordant += 1
        else:
            discordant += 1
    total = concordant + discordant
    return (concordant - discordant) / total if total else 1.0


def run_simulated_session(
    cluster: DocumentCluster,
    user: GroundTruthUser,
    references: List[List[str]],
    config: RunConfig,
    seed: int,
    embeddings: Optional[EmbeddingTable] = None,
) -> SessionResult:
    """Drive a full session with the simulated user and expert."""
    engine = SessionEngine(cluster, config, seed, embeddings)
    expert = GroundTruthReward(
        references=references,
        alpha=config.alpha,
        beta=config.beta,
        gamma=config.gamma,
    )

    while engine.stage == STAGE_ELICIT:
        pair = engine.current_query()
        if pair is None:
            break
        record = answer_preference(
            user, pair[0], pair[1],
            seed=derive_seed(seed, "answer"), round=engine.round,
        )
        engine.submit_feedback(pair[0], pair[1], record.label)

    if engine.stage == STAGE_REWARD:
        if config.reward_mode == "point":
            indices = engine.point_query_indices()
            scores = {
                i: score_summary(expert, engine.pool[i], engine.cluster)
                for i in indices
            }
            engine.submit_point_scores(scores)
        else:
            while engine.stage == STAGE_REWARD:
                pair = engine.current_summary_query()
                if pair is None:
                    break
                left, right = engine.pool[pair[0]], engine.pool[pair[1]]
                label = (
                    1
                    if score_summary(expert, left, engine.cluster)
                    > score_summary(expert, right, engine.cluster)
                    else 0
                )
                engine.submit_summary_feedback(pair[0], pair[1], label)

    assert engine.stage == STAGE_FINAL
    final = engine.final
    tokens = final.tokens(engine.cluster)
    scores = rouge.score_all(tokens, references) if references else None
    tau = None
    if config.ablation != "PR":
        learned = preference.rank(engine.utility, engine.cluster)
        truth = user.ranking()
        tau = kendall_tau(learned, truth)
    return SessionResult(
        final_summary=final,
        final_json=engine.final_summary_json(),
        rouge1=scores.rouge1 if scores else 0.0,
        rouge2=scores.rouge2 if scores else 0.0,
        rougeL=scores.rougeL if scores else 0.0,
        ground_truth_value=score_summary(expert, final, engine.cluster),
        kendall_tau=tau,
        rounds_used=engine.round,
        config=config.to_json(),
        seed=seed,
        learning_curve=engine.learning_curve.rows() if engine.learning_curve else [],
    )
