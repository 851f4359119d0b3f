"""Candidate summary construction under a strict token-length budget.

Sentence selection maximizes the total weight of covered concepts subject
to sum(sentence lengths) < L.  Small instances are solved exactly by
branch-and-bound with a fractional-knapsack bound; larger ones fall back
to weight-per-token greedy selection with one-swap improvement.  A diverse
summary pool keeps the top-scoring selections whose redundancy stays under
a cap.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Mapping, Tuple

from .corpus import DocumentCluster
from .errors import InfeasibleError, ValidationError

EXACT_SENTENCE_LIMIT = 25
_EPS = 1e-9


@dataclass(frozen=True)
class Summary:
    sentence_ids: Tuple[int, ...]
    length: int
    concept_cover: FrozenSet[int]
    score: float
    redundancy: float = 0.0

    def text(self, cluster: DocumentCluster) -> str:
        return " ".join(cluster.sentences[sid].text for sid in self.sentence_ids)

    def tokens(self, cluster: DocumentCluster) -> list:
        out = []
        for sid in self.sentence_ids:
            out.extend(cluster.sentences[sid].tokens)
        return out

    def to_json(self, cluster: DocumentCluster) -> dict:
        return {
            "sentence_ids": list(self.sentence_ids),
            "text": self.text(cluster),
            "length": self.length,
            "score": self.score,
            "redundancy": self.redundancy,
        }


@dataclass
class SummaryPool:
    summaries: list
    budget_L: int

    def __len__(self) -> int:
        return len(self.summaries)

    def __iter__(self):
        return iter(self.summaries)

    def __getitem__(self, idx) -> Summary:
        return self.summaries[idx]


def _sentence_concepts(cluster: DocumentCluster) -> list:
    table = [set() for _ in cluster.sentences]
    for concept in cluster.concepts:
        for sid in concept.sentence_ids:
            table[sid].add(concept.id)
    return [frozenset(s) for s in table]


def _score_selection(selection: Iterable[int], sent_concepts, weights) -> float:
    covered = set()
    for sid in selection:
        covered |= sent_concepts[sid]
    return sum(weights.get(cid, 0.0) for cid in covered)


def _make_summary(cluster, selection, sent_concepts, weights) -> Summary:
    ordered = tuple(sorted(selection))
    covered = frozenset().union(*[sent_concepts[s] for s in ordered]) if ordered else frozenset()
    return Summary(
        sentence_ids=ordered,
        length=sum(cluster.sentences[s].length for s in ordered),
        concept_cover=covered,
        score=sum(weights.get(cid, 0.0) for cid in covered),
    )


def _fractional_bound(order_idx, lengths, marginals, capacity) -> float:
    """Upper bound on extra score: fractional knapsack over per-sentence
    marginal weights (overlap between remaining sentences is ignored)."""
    items = sorted(
        ((marginals[s] / lengths[s], marginals[s], lengths[s]) for s in order_idx if marginals[s] > 0),
        reverse=True,
    )
    bound = 0.0
    for density, weight, length in items:
        if capacity <= 0:
            break
        take = min(length, capacity)
        bound += density * take
        capacity -= take
    return bound


def generate_optimal(
    cluster: DocumentCluster,
    weights: Mapping[int, float],
    L: int,
    exact_limit: int = EXACT_SENTENCE_LIMIT,
) -> Summary:
    """Best-scoring sentence subset with total length strictly under L.

    Equal-score optima break toward the lexicographically smallest
    sentence-id sequence (so the empty summary wins when all weights are
    zero); selected sentences keep cluster order.
    """
    sentences = cluster.sentences
    if not sentences:
        raise ValidationError("cluster has no sentences")
    if all(s.length >= L for s in sentences):
        raise InfeasibleError(f"no sentence fits within length budget {L}")
    sent_concepts = _sentence_concepts(cluster)
    if len(sentences) <= exact_limit:
        selection = _branch_and_bound(cluster, weights, L, sent_concepts)
    else:
        selection = _greedy_with_swap(cluster, weights, L, sent_concepts)
    return _make_summary(cluster, selection, sent_concepts, weights)


def _branch_and_bound(cluster, weights, L, sent_concepts):
    n = len(cluster.sentences)
    lengths = [s.length for s in cluster.sentences]
    positive = {cid: w for cid, w in weights.items() if w > 0}

    best_score = 0.0
    best_sel: Tuple[int, ...] = ()

    def concept_gain(sid, covered):
        return sum(positive.get(cid, 0.0) for cid in sent_concepts[sid] if cid not in covered)

    def dfs(idx, chosen, used, covered, score):
        nonlocal best_score, best_sel
        candidate = tuple(chosen)
        if score > best_score + _EPS or (
            abs(score - best_score) <= _EPS and candidate < best_sel
        ):
            best_score, best_sel = score, candidate
        if idx == n:
            return
        remaining = range(idx, n)
        marginals = {s: concept_gain(s, covered) for s in remaining}
        bound = score + _fractional_bound(remaining, lengths, marginals, L - 1 - used)
        if bound < best_score - _EPS:
            return
        # include idx first: higher scores found early tighten pruning
        if used + lengths[idx] < L:
            new_covered = covered | sent_concepts[idx]
            gain = sum(weights.get(cid, 0.0) for cid in sent_concepts[idx] if cid not in covered)
            chosen.append(idx)
            dfs(idx + 1, chosen, used + lengths[idx], new_covered, score + gain)
            chosen.pop()
        dfs(idx + 1, chosen, used, covered, score)

    dfs(0, [], 0, set(), 0.0)
    return best_sel


def _greedy_with_swap(cluster, weights, L, sent_concepts):
    n = len(cluster.sentences)
    lengths = [s.length for s in cluster.sentences]

    def marginal(sid, covered):
        return sum(weights.get(cid, 0.0) for cid in sent_concepts[sid] if cid not in covered)

    chosen: set = set()
    covered: set = set()
    used = 0
    while True:
        best = None
        for sid in range(n):
            if sid in chosen or used + lengths[sid] >= L:
                continue
            gain = marginal(sid, covered)
            if gain <= _EPS:
                continue
            key = (gain / lengths[sid], -sid)
            if best is None or key > best[0]:
                best = (key, sid, gain)
        if best is None:
            break
        _, sid, _ = best
        chosen.add(sid)
        covered |= sent_concepts[sid]
        used += lengths[sid]

    def total(sel):
        return _score_selection(sel, sent_concepts, weights)

    improved = True
    while improved:
        improved = False
        current = total(chosen)
        for out_sid, in_sid in itertools.product(sorted(chosen), range(n)):
            if in_sid in chosen:
                continue
            trial = (chosen - {out_sid}) | {in_sid}
            if sum(lengths[s] for s in trial) >= L:
                continue
            if total(trial) > current + _EPS:
                chosen = trial
                improved = True
                break
    return tuple(sorted(chosen))


def redundancy(
    summary: Summary,
    cluster: DocumentCluster,
    preferred: Iterable[int] = (),
) -> float:
    """Mean pairwise Jaccard of sentence token sets, with the tokens of
    preferred concepts removed, divided by the sentence count."""
    if not summary.sentence_ids:
        raise ValidationError("redundancy of an empty summary is undefined")
    if len(summary.sentence_ids) == 1:
        return 0.0
    drop = set()
    for cid in preferred:
        drop.update(cluster.concepts[cid].tokens)
    token_sets = [
        set(cluster.sentences[sid].tokens) - drop for sid in summary.sentence_ids
    ]
    sims = []
    for a, b in itertools.combinations(token_sets, 2):
        union = a | b
        sims.append(len(a & b) / len(union) if union else 0.0)
    mean = sum(sims) / len(sims)
    return mean / len(summary.sentence_ids)


def build_pool(
    cluster: DocumentCluster,
    weights: Mapping[int, float],
    L: int,
    pool_size: int,
    redundancy_cap: float,
    preferred: Iterable[int] = (),
    seed: int = 0,
    exact_limit: int = 16,
) -> SummaryPool:
    """Up to pool_size distinct top-scoring summaries under the redundancy cap.

    Clusters of <= exact_limit sentences are enumerated exhaustively;
    larger ones use seeded weight-perturbed greedy runs.
    """
    if pool_size < 1:
        raise ValidationError(f"pool_size must be >= 1, got {pool_size}")
    sentences = cluster.sentences
    sent_concepts = _sentence_concepts(cluster)
    feasible_single = [s.index_in_cluster for s in sentences if s.length < L]
    if not feasible_single:
        raise InfeasibleError(f"no sentence fits within length budget {L}")

    candidates: Dict[Tuple[int, ...], Summary] = {}

    def consider(selection):
        selection = tuple(sorted(selection))
        if not selection or selection in candidates:
            return
        if sum(sentences[s].length for s in selection) >= L:
            return
        candidates[selection] = _make_summary(cluster, selection, sent_concepts, weights)

    n = len(sentences)
    if n <= exact_limit:
        lengths = [s.length for s in sentences]

        def enumerate_subsets(idx, current, used):
            if idx == n:
                if current:
                    consider(tuple(current))
                return
            enumerate_subsets(idx + 1, current, used)
            if used + lengths[idx] < L:
                current.append(idx)
                enumerate_subsets(idx + 1, current, used + lengths[idx])
                current.pop()

        enumerate_subsets(0, [], 0)
    else:
        consider(_greedy_with_swap(cluster, weights, L, sent_concepts))
        rng = random.Random(seed)
        for _ in range(max(pool_size * 6, 24)):
            jitter = {
                cid: w * rng.uniform(0.5, 1.5) + rng.uniform(0.0, 0.01)
                for cid, w in weights.items()
            }
            consider(_greedy_with_swap(cluster, jitter, L, sent_concepts))
        for sid in feasible_single:
            consider((sid,))

    preferred = frozenset(preferred)
    scored = []
    for summary in candidates.values():
        red = redundancy(summary, cluster, preferred)
        if red > redundancy_cap + _EPS:
            continue
        scored.append(
            Summary(
                sentence_ids=summary.sentence_ids,
                length=summary.length,
                concept_cover=summary.concept_cover,
                score=summary.score,
                redundancy=red,
            )
        )
    scored.sort(key=lambda s: (-s.score, s.sentence_ids))
    if not scored:
        raise InfeasibleError("no feasible summary satisfies the redundancy cap")
    return SummaryPool(summaries=scored[:pool_size], budget_L=L)
