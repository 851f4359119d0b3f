"""Simulated user, simulated domain expert, and synthetic clusters.

The simulated user answers concept-pair queries from a hidden utility
table (optionally flipping answers with a noise probability).  The
simulated expert scores summaries by a linear blend of ROUGE-1, ROUGE-2,
and redundancy against planted references.  Synthetic clusters are built
from a seeded word chain with weighted topic segments so that ground-truth
utilities are linear in the concept features and the references contain
the planted important content.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from . import rouge
from .corpus import DocumentCluster, build_cluster, featurize_concepts, feature_matrix
from .errors import ValidationError
from .preference import PreferenceRecord
from .sumgen import Summary, redundancy

DEFAULT_ALPHA = 0.8
DEFAULT_BETA = 0.5
DEFAULT_GAMMA = 0.25


@dataclass
class GroundTruthUser:
    true_utilities: Dict[int, float]
    noise: float = 0.0

    def __post_init__(self):
        values = list(self.true_utilities.values())
        if len(set(values)) != len(values):
            raise ValidationError("ground-truth utilities must be pairwise distinct")
        if not 0.0 <= self.noise < 1.0:
            raise ValidationError("noise must lie in [0, 1)")

    def ranking(self) -> Dict[int, int]:
        order = sorted(self.true_utilities, key=lambda cid: (self.true_utilities[cid], cid))
        return {cid: pos for pos, cid in enumerate(order)}


def answer_preference(
    user: GroundTruthUser,
    a: int,
    b: int,
    seed: int,
    round: int = 0,
) -> PreferenceRecord:
    """Label 1 iff U(a) > U(b), flipped with probability `noise`."""
    if a not in user.true_utilities or b not in user.true_utilities:
        raise ValidationError(f"unknown concept id in pair ({a}, {b})")
    label = 1 if user.true_utilities[a] > user.true_utilities[b] else 0
    if user.noise > 0:
        rng = random.Random(seed * 1_000_003 + a * 8191 + b * 131 + round)
        if rng.random() < user.noise:
            label = 1 - label
    return PreferenceRecord(left_id=a, right_id=b, label=label, round=round)


@dataclass
class GroundTruthReward:
    references: list
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    preferred: frozenset = frozenset()

    def __post_init__(self):
        if not self.references:
            raise ValidationError("ground-truth reward needs references")


def score_summary(gt: GroundTruthReward, summary: Summary, cluster: DocumentCluster) -> float:
    """alpha * ROUGE-1 + beta * ROUGE-2 - gamma * redundancy."""
    if not gt.references:
        raise ValidationError("ground-truth reward needs references")
    if not summary.sentence_ids:
        return 0.0
    tokens = summary.tokens(cluster)
    r1 = rouge.rouge_n(tokens, gt.references, 1)
    r2 = rouge.rouge_n(tokens, gt.references, 2)
    red = redundancy(summary, cluster, gt.preferred)
    return gt.alpha * r1 + gt.beta * r2 - gt.gamma * red


def answer_summary_preference(
    gt: GroundTruthReward,
    cluster: DocumentCluster,
    left: Summary,
    right: Summary,
    left_id: int,
    right_id: int,
    round: int = 0,
) -> PreferenceRecord:
    label = 1 if score_summary(gt, left, cluster) > score_summary(gt, right, cluster) else 0
    return PreferenceRecord(left_id=left_id, right_id=right_id, label=label, round=round)


@dataclass
class GeneratorConfig:
    """Knobs for the seeded synthetic cluster generator."""

    n_docs: int = 3
    sentences_per_doc: int = 4
    vocab_size: int = 24
    n_topics: int = 3
    topic_decay: float = 0.55  # weight of topic k is topic_decay ** k
    sentence_len: Tuple[int, int] = (4, 6)
    unit: str = "unigram"
    noise: float = 0.0
    reference_token_budget: int = 18
    n_references: int = 1
    feature_weight_decay: float = 0.6  # planted utility mass along schema order
    full_coverage: bool = False  # first doc sweeps the whole chain
    variant_rate: float = 0.3  # chance a token surfaces as its plural variant


def make_synthetic_cluster(
    config: GeneratorConfig,
    seed: int,
) -> Tuple[DocumentCluster, GroundTruthUser, list]:
    """Deterministic synthetic cluster, hidden user, and references.

    The vocabulary is a word chain segmented into weighted topics;
    sentences are contiguous windows inside one topic (sampled by weight),
    so unigram concepts outnumber bigram concepts, which outnumber
    distinct sentences.  Ground-truth utilities are linear in the concept
    features with decaying planted weights, plus a tiny id-ordered jitter
    to keep them pairwise distinct.
    """
    if config.vocab_size < 2:
        raise ValidationError("vocab_size must be >= 2")
    if config.n_topics < 1 or config.n_topics > config.vocab_size:
        raise ValidationError("n_topics must be in [1, vocab_size]")
    rng = random.Random(seed)
    vocab = [f"w{i:03d}" for i in range(config.vocab_size)]

    # contiguous topic segments over the word chain
    bounds = np.linspace(0, config.vocab_size, config.n_topics + 1).astype(int)
    segments = [
        (int(bounds[k]), int(bounds[k + 1])) for k in range(config.n_topics)
    ]
    topic_weights = [config.topic_decay ** k for k in range(config.n_topics)]
    total_weight = sum(topic_weights)

    def sample_topic() -> int:
        roll = rng.random() * total_weight
        acc = 0.0
        for k, w in enumerate(topic_weights):
            acc += w
            if roll <= acc:
                return k
        return config.n_topics - 1

    def render(words) -> str:
        # plural variants create near-duplicate concepts (same stem), the
        # structure active selection is meant to exploit
        out = []
        for w in words:
            if config.variant_rate > 0 and rng.random() < config.variant_rate:
                out.append(w + "s")
            else:
                out.append(w)
        return " ".join(out)

    documents = []
    low_len, high_len = config.sentence_len
    if config.full_coverage:
        # deterministic sweep: consecutive windows covering every segment,
        # so every base word is guaranteed to appear as a concept
        sweep = []
        for start, end in segments:
            pos = start
            while pos < end:
                width = min(high_len, end - pos)
                sweep.append(" ".join(vocab[pos : pos + width]))
                pos += width
        documents.append(("doc-sweep", ". ".join(sweep) + "."))
    for d in range(config.n_docs):
        sentences = []
        for _ in range(config.sentences_per_doc):
            topic = sample_topic()
            start, end = segments[topic]
            width = end - start
            length = min(rng.randint(low_len, high_len), width)
            offset = start if width == length else start + rng.randrange(width - length + 1)
            sentences.append(render(vocab[offset : offset + length]))
        documents.append((f"doc{d}", ". ".join(sentences) + "."))

    cluster = build_cluster(f"synthetic-{seed}", documents, config.unit)
    cluster = featurize_concepts(cluster)

    features = feature_matrix(cluster)
    weight_rng = random.Random(seed * 31 + 7)
    planted = np.array(
        [
            config.feature_weight_decay ** k * (0.5 + weight_rng.random())
            for k in range(features.shape[1])
        ]
    )
    utilities = features @ planted
    jitter = 1e-9
    true_utilities = {
        cid: float(utilities[cid] + jitter * (cid + 1))
        for cid in range(len(cluster.concepts))
    }
    user = GroundTruthUser(true_utilities=true_utilities, noise=config.noise)

    references = _build_references(cluster, true_utilities, config, seed)
    cluster.references = [" ".join(tokens) for tokens in references]
    return cluster, user, references


def _build_references(cluster, true_utilities, config, seed) -> list:
    """References from the top planted-value sentences under a token budget."""
    sent_values = []
    for sent in cluster.sentences:
        cids = cluster.sentence_concepts(sent.index_in_cluster)
        value = sum(max(true_utilities[cid], 0.0) for cid in cids)
        sent_values.append((value / max(sent.length, 1), sent.index_in_cluster))
    sent_values.sort(key=lambda vi: (-vi[0], vi[1]))

    references = []
    taken_global: set = set()
    for r in range(config.n_references):
        tokens_used = 0
        chosen = []
        for _, sid in sent_values:
            if sid in taken_global:
                continue
            length = cluster.sentences[sid].length
            if tokens_used + length > config.reference_token_budget:
                continue
            chosen.append(sid)
            taken_global.add(sid)
            tokens_used += length
        if not chosen and r == 0:
            chosen = [sent_values[0][1]]
        if chosen:
            text_tokens = []
            for sid in sorted(chosen):
                text_tokens.extend(cluster.sentences[sid].tokens)
            references.append(text_tokens)
    return references


def user_from_references(cluster: DocumentCluster) -> GroundTruthUser:
    """Simulated user whose utilities reward concepts found in references.

    Concepts appearing in more references score higher; a small
    frequency term and an id-ordered jitter keep utilities distinct.
    """
    from .corpus import reference_tokens

    if not cluster.references:
        raise ValidationError("cluster has no reference summaries")
    refs = reference_tokens(cluster)

    def contains(ref, grams):
        if len(grams) == 1:
            return grams[0] in ref
        return any(
            tuple(ref[i : i + len(grams)]) == grams
            for i in range(len(ref) - len(grams) + 1)
        )

    utilities = {}
    for concept in cluster.concepts:
        grams = concept.tokens
        hits = sum(contains(ref, grams) for ref in refs)
        utilities[concept.id] = (
            hits / len(refs)
            + 0.01 * len(concept.sentence_ids)
            + 1e-9 * (concept.id + 1)
        )
    return GroundTruthUser(true_utilities=utilities)


def oracle_rouge_bound(
    cluster: DocumentCluster,
    references: Sequence[Sequence[str]],
    L: int,
) -> Tuple[float, tuple]:
    """Exhaustive best achievable ROUGE-1 under the strict length budget."""
    lengths = [s.length for s in cluster.sentences]
    n = len(lengths)
    best = (0.0, ())

    def dfs(idx, chosen, used):
        nonlocal best
        if chosen:
            tokens = []
            for sid in chosen:
                tokens.extend(cluster.sentences[sid].tokens)
            score = rouge.rouge_n(tokens, references, 1)
            if score > best[0] + 1e-12:
                best = (score, tuple(chosen))
        if idx == n:
            return
        for nxt in range(idx, n):
            if used + lengths[nxt] < L:
                chosen.append(nxt)
                dfs(nxt + 1, chosen, used + lengths[nxt])
                chosen.pop()

    dfs(0, [], 0)
    return best
