"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
lines; every tolerance is pinned here.
"""

import dataclasses
import itertools
import json
import random
import time

import numpy as np
import pytest

from prefsum import analyses, preference, rouge
from prefsum.active import partition_concepts, partition_objective
from prefsum.config import RunConfig
from prefsum.corpus import build_cluster
from prefsum.pipeline import (
    SessionEngine,
    canonical_json,
    derive_seed,
    kendall_tau,
    run_simulated_session,
)
from prefsum.policy import best_summary, train_policy
from prefsum.preference import PreferenceRecord, UtilityModel
from prefsum.reward import cross_entropy_and_gradient, mse_and_gradient
from prefsum.simulate import (
    GeneratorConfig,
    GroundTruthReward,
    answer_preference,
    make_synthetic_cluster,
    score_summary,
)
from prefsum.sumgen import SummaryPool, _sentence_concepts, generate_optimal
from prefsum.sumgen import Summary as SummaryRecord


def _report(name):
    print(f"\n[acceptance] {name}: PASS")


# ---------------------------------------------------------------- sumgen


def test_sumgen_oracle_equivalence():
    rng = random.Random(1234)
    start = time.time()
    exact = 0
    for trial in range(50):
        n_sent = rng.randint(3, 12)
        vocab = [f"v{k}" for k in range(14)]
        sentence_words = [
            [rng.choice(vocab) for _ in range(rng.randint(2, 6))]
            for _ in range(n_sent)
        ]
        text = ". ".join(" ".join(w) for w in sentence_words) + "."
        cluster = build_cluster(f"oracle{trial}", [("d0", text)], "unigram")
        weights = {c.id: rng.uniform(-0.5, 2.0) for c in cluster.concepts}
        L = rng.randint(5, 18)
        if all(s.length >= L for s in cluster.sentences):
            L = max(s.length for s in cluster.sentences) + 2

        sent_concepts = _sentence_concepts(cluster)
        lengths = [s.length for s in cluster.sentences]
        best = 0.0
        for r in range(n_sent + 1):
            for combo in itertools.combinations(range(n_sent), r):
                if sum(lengths[s] for s in combo) >= L:
                    continue
                covered = set()
                for s in combo:
                    covered |= sent_concepts[s]
                best = max(best, sum(weights.get(c, 0.0) for c in covered))
        got = generate_optimal(cluster, weights, L)
        assert got.score == pytest.approx(best, abs=1e-9), (
            f"trial {trial}: optimal {got.score} != exhaustive {best}"
        )
        exact += 1
    elapsed = time.time() - start
    assert exact == 50
    assert elapsed < 10.0, f"oracle equivalence took {elapsed:.1f}s (limit 10s)"
    _report(f"sumgen oracle equivalence 50/50 in {elapsed:.1f}s")


# ---------------------------------------------------------------- partition


def _enumerate_partitions(n):
    def rec(prefix, max_label):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for lab in range(max_label + 2):
            yield from rec(prefix + [lab], max(max_label, lab))

    yield from rec([], -1)


def test_partition_quality_and_transitivity():
    rng = random.Random(77)
    for trial in range(30):
        n = rng.randint(6, 8)
        probs = {}
        for i, j in itertools.combinations(range(n), 2):
            probs[(i, j)] = min(max(rng.random(), 0.01), 0.99)
        best = max(
            partition_objective(dict(enumerate(labels)), probs)
            for labels in _enumerate_partitions(n)
        )
        got = partition_concepts(probs, seed=trial)
        assert got.objective >= 0.95 * best - 1e-9, (
            f"trial {trial}: {got.objective} < 0.95 * {best}"
        )
        for i, j, k in itertools.permutations(range(n), 3):
            x_ij = int(got.coref(i, j))
            x_jk = int(got.coref(j, k))
            x_ik = int(got.coref(i, k))
            assert x_ik >= x_ij + x_jk - 1
    _report("partition local search >= 0.95x exhaustive, transitive, 30/30")


# ---------------------------------------------------------------- recovery


GEN_50 = GeneratorConfig(
    n_docs=4,
    sentences_per_doc=6,
    vocab_size=50,
    n_topics=4,
    sentence_len=(4, 7),
    full_coverage=True,
    variant_rate=0.0,
)


def test_preference_recovery_full_pairwise():
    cluster, user, _ = make_synthetic_cluster(GEN_50, seed=3)
    assert len(cluster.concepts) == 50
    prefs = [
        answer_preference(user, i, j, seed=0)
        for i, j in itertools.combinations(range(50), 2)
    ]
    model = UtilityModel.zeros(len(cluster.feature_names), learning_rate=0.01, epochs=100)
    fitted = preference.fit(model, prefs, cluster, seed=0)
    tau = kendall_tau(preference.rank(fitted, cluster), user.ranking())
    assert tau >= 0.9, f"full-pairwise tau {tau:.3f} < 0.9"
    _report(f"preference recovery: full-pairwise tau {tau:.3f} >= 0.9")


def test_preference_recovery_budget_30():
    config = RunConfig(budget=30, summary_length=16, pool_size=4, reward_budget=2,
                       policy_episodes=50)
    taus = []
    for seed in range(20):
        cluster, user, _ = make_synthetic_cluster(GEN_50, seed=seed)
        engine = SessionEngine(cluster, config, seed)
        while engine.stage == "elicitation":
            pair = engine.current_query()
            if pair is None:
                break
            record = answer_preference(
                user, pair[0], pair[1], seed=derive_seed(seed, "answer"),
                round=engine.round,
            )
            engine.submit_feedback(pair[0], pair[1], record.label)
        taus.append(kendall_tau(preference.rank(engine.utility, engine.cluster),
                                user.ranking()))
    mean_tau = float(np.mean(taus))
    assert mean_tau >= 0.6, f"budget-30 mean tau {mean_tau:.3f} < 0.6"
    _report(f"preference recovery: budget-30 heuristic mean tau {mean_tau:.3f} >= 0.6")


# ------------------------------------------------------- strategy trend


def test_heuristic_strategy_beats_random():
    rows = analyses.run_strategy_analysis(
        strategies=("heuristic", "random"), seeds=tuple(range(20))
    )
    by_name = {r["strategy"]: r for r in rows}
    h = by_name["heuristic"]["mean_rouge1"]
    r = by_name["random"]["mean_rouge1"]
    assert h >= r, f"heuristic {h:.3f} < random {r:.3f}"
    _report(f"strategy direction: heuristic rouge1 {h:.3f} >= random {r:.3f} (20 seeds)")


# --------------------------------------------------------- budget trend


def _spearman(xs, ys):
    def ranks(values):
        order = sorted(range(len(values)), key=lambda i: values[i])
        out = [0.0] * len(values)
        for pos, idx in enumerate(order):
            out[idx] = pos
        return out

    rx, ry = ranks(xs), ranks(ys)
    n = len(xs)
    mx, my = sum(rx) / n, sum(ry) / n
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = (sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)) ** 0.5
    return num / den if den else 0.0


def test_budget_curve_direction():
    rows = analyses.run_budget_analysis(seeds=tuple(range(10)))
    budgets = [r["budget"] for r in rows]
    means = [r["mean_rouge1"] for r in rows]
    stds = [r["std_rouge1"] for r in rows]
    rho = _spearman(budgets, means)
    assert rho > 0, f"spearman(budget, mean rouge1) = {rho:.3f} <= 0"
    deltas = [means[i + 1] - means[i] for i in range(len(means) - 1)]
    pooled = float(np.mean(stds))
    for i in range(len(deltas) - 1):
        assert deltas[i + 1] <= deltas[i] + pooled, (
            f"improvement grew beyond 1 stddev at step {i}: "
            f"{deltas[i + 1]:.3f} > {deltas[i]:.3f} + {pooled:.3f}"
        )
    _report(f"budget direction: spearman {rho:.3f} > 0, deltas non-increasing within 1 std")


# ----------------------------------------------------------- unit trend


def test_unit_convergence_order():
    rows = analyses.run_unit_analysis(seeds=tuple(range(10)))
    rounds = {r["unit"]: r["rounds_to_converge"] for r in rows}
    assert rounds["unigram"] >= rounds["bigram"] >= rounds["sentence"], rounds
    _report(
        "unit direction: rounds-to-converge "
        f"unigram {rounds['unigram']} >= bigram {rounds['bigram']} "
        f">= sentence {rounds['sentence']}"
    )


# ------------------------------------------------------------- ablations


def test_ablation_directions():
    rows = analyses.run_ablation(seeds=tuple(range(10)))
    by_name = {r["variant"]: r for r in rows}
    full = by_name["full"]
    for variant in ("AC", "PR"):
        other = by_name[variant]
        assert full["mean_value"] > other["mean_value"], (
            f"full value {full['mean_value']:.3f} <= {variant} {other['mean_value']:.3f}"
        )
        assert full["mean_rouge1"] > other["mean_rouge1"], (
            f"full rouge1 {full['mean_rouge1']:.3f} <= {variant} {other['mean_rouge1']:.3f}"
        )
    ge = by_name["GE"]
    assert full["mean_value"] > ge["mean_value"]
    assert full["mean_rouge1"] > ge["mean_rouge1"]
    _report(
        "ablation direction: full > AC, PR, GE on mean value and rouge1 "
        f"(full rouge1 {full['mean_rouge1']:.3f})"
    )


# ---------------------------------------------------------------- gradients


def _finite_difference(func, w, h=1e-6):
    numeric = np.zeros_like(w)
    for k in range(len(w)):
        up, down = w.copy(), w.copy()
        up[k] += h
        down[k] -= h
        numeric[k] = (func(up) - func(down)) / (2 * h)
    return numeric


def _relative_error(analytic, numeric):
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return np.linalg.norm(analytic - numeric) / denom


def test_gradient_checks():
    rng = np.random.default_rng(42)
    worst = {"bt": 0.0, "mse": 0.0, "ce": 0.0}
    for _ in range(100):
        dim = rng.integers(2, 7)
        n_items = rng.integers(3, 8)
        feats = rng.normal(size=(n_items, dim))
        prefs = [
            PreferenceRecord(i, j, int(rng.random() < 0.5))
            for i, j in itertools.combinations(range(n_items), 2)
        ]
        w = rng.normal(size=dim)
        _, grad = preference.log_likelihood_and_gradient(w, prefs, feats)
        numeric = _finite_difference(
            lambda v: preference.log_likelihood_and_gradient(v, prefs, feats)[0], w
        )
        worst["bt"] = max(worst["bt"], _relative_error(grad, numeric))

        samples = [(rng.normal(size=dim), float(rng.normal())) for _ in range(6)]
        _, grad = mse_and_gradient(w, samples)
        numeric = _finite_difference(lambda v: mse_and_gradient(v, samples)[0], w)
        worst["mse"] = max(worst["mse"], _relative_error(grad, numeric))

        triples = [
            (rng.normal(size=dim), rng.normal(size=dim), int(rng.random() < 0.5))
            for _ in range(6)
        ]
        _, grad = cross_entropy_and_gradient(w, triples)
        numeric = _finite_difference(
            lambda v: cross_entropy_and_gradient(v, triples)[0], w
        )
        worst["ce"] = max(worst["ce"], _relative_error(grad, numeric))
    for name, err in worst.items():
        assert err < 1e-5, f"{name} gradient relative error {err:.2e} >= 1e-5"
    _report(
        "gradient checks: worst relative errors "
        f"bt={worst['bt']:.1e} mse={worst['mse']:.1e} ce={worst['ce']:.1e} < 1e-5"
    )


# ---------------------------------------------------------------- policy


def test_policy_bandit_convergence():
    docs = [("d0", "alpha beta gamma. delta epsilon zeta. eta theta iota.")]
    from prefsum.corpus import featurize_concepts

    cluster = featurize_concepts(build_cluster("bandit", docs, "unigram"))
    values = [1.0, 0.5, 0.1]
    start = time.time()
    wins = 0
    for seed in range(100):
        summaries = [
            SummaryRecord(sentence_ids=(i,), length=3, concept_cover=frozenset(),
                          score=1.0 - 0.1 * i)
            for i in range(3)
        ]
        pool = SummaryPool(summaries=summaries, budget_L=10)
        features = {i: np.eye(3)[i] for i in range(3)}
        model, _ = train_policy(
            cluster, pool, None, episodes=2000, seed=seed,
            features=features, reward_fn=lambda i: values[i],
        )
        chosen = best_summary(model, cluster, pool, features)
        wins += chosen.sentence_ids == (0,)
    elapsed = time.time() - start
    assert wins >= 95, f"greedy picked the best arm in only {wins}/100 runs"
    assert elapsed < 5.0, f"policy convergence took {elapsed:.1f}s (limit 5s)"
    _report(f"policy convergence: best arm in {wins}/100 runs, {elapsed:.1f}s < 5s")


# ---------------------------------------------------------------- rouge


ROUGE_CASES = [
    # (candidate, references, n, expected)
    ("a b c", ["a b c"], 1, 1.0),
    ("a b c", ["a b d"], 1, 2 / 3),
    ("a b c", ["a b d"], 2, 1 / 2),
    ("a c b", ["a b c"], 2, 0.0),
    ("x y z", ["p q r"], 1, 0.0),
    ("cat cat cat", ["cat dog"], 1, 1 / 2),
    ("a b", ["a x", "b y z"], 1, 2 / 5),
    ("a b", ["a b c d"], 2, 1 / 3),
    ("a b a", ["a a b"], 1, 1.0),
    ("x y z w", ["x y z q"], 3, 1 / 2),
]

ROUGE_L_CASES = [
    ("a b c", ["a b c"], 1.0),
    ("a c b", ["a b c"], 2 / 3),
    ("cat cat cat", ["cat dog"], 1 / 2),
    ("a b a", ["a a b"], 2 / 3),
    ("a b", ["a x", "b y z"], 1 / 2),
    ("", ["a b"], 0.0),
]


def test_rouge_correctness_suite():
    for cand, refs, n, expected in ROUGE_CASES:
        got = rouge.rouge_n(cand.split(), [r.split() for r in refs], n)
        assert got == pytest.approx(expected), (cand, refs, n, got, expected)
    for cand, refs, expected in ROUGE_L_CASES:
        got = rouge.rouge_l(cand.split(), [r.split() for r in refs])
        assert got == pytest.approx(expected), (cand, refs, got, expected)
    # truncation at 75 tokens is a no-op for short candidates
    for cand, refs, n, expected in ROUGE_CASES:
        full = rouge.rouge_n(cand.split(), [r.split() for r in refs], n)
        truncated = rouge.rouge_n(cand.split(), [r.split() for r in refs], n,
                                  truncation=75)
        assert truncated == full
    long_cand = ["hit"] * 80 + ["miss"] * 20
    long_ref = ["hit"] * 100
    assert rouge.rouge_n(long_cand, [long_ref], 1) == pytest.approx(0.8)
    assert rouge.rouge_n(long_cand, [long_ref], 1, truncation=75) == pytest.approx(0.75)
    _report("rouge correctness: 10-case n-gram suite + LCS suite exact, truncation ok")


# ---------------------------------------------------------------- service


SERVICE_CONFIG = {
    "budget": 4,
    "summary_length": 14,
    "reward_budget": 2,
    "pool_size": 4,
    "policy_episodes": 60,
}


def test_service_replay_and_offline_equivalence(tmp_path):
    from prefsum.corpus import cluster_to_json
    from prefsum.session import SessionStore, replay_session

    seed = 31
    generator = GeneratorConfig()
    cluster, user, refs = make_synthetic_cluster(generator, seed=seed)
    config = RunConfig.from_json({**RunConfig().to_json(), **SERVICE_CONFIG,
                                  "seed": seed})

    store = SessionStore(tmp_path / "sessions")
    handle = store.create_session(cluster_to_json(cluster), config, seed)
    expert = GroundTruthReward(references=refs)
    live_snapshots = [handle.snapshot()]
    while handle.engine.stage != "final":
        query = handle.next_query()
        live_snapshots.append(handle.snapshot())
        if query.get("exhausted"):
            continue
        if query["stage"] == "elicitation":
            left, right = query["left"]["id"], query["right"]["id"]
            record = answer_preference(
                user, left, right, seed=derive_seed(seed, "answer"),
                round=query["round"],
            )
            handle.post_feedback(left, right, record.label)
        else:
            left, right = query["left"]["index"], query["right"]["index"]
            label = 1 if score_summary(expert, handle.engine.pool[left], handle.engine.cluster) > \
                score_summary(expert, handle.engine.pool[right], handle.engine.cluster) else 0
            handle.post_summary_preference(left, right, label)
        live_snapshots.append(handle.snapshot())
    handle.post_rating(8)
    live_snapshots.append(handle.snapshot())

    events = [json.dumps(e.to_json(), sort_keys=True) for e in handle.events]
    replayed_ok = 0
    for cut in range(1, len(events) + 1):
        partial = tmp_path / f"cut{cut}.jsonl"
        partial.write_text("\n".join(events[:cut]) + "\n")
        replayed = replay_session(handle.session_id, partial)
        snap = replayed.snapshot()
        assert snap in live_snapshots, f"replay after event {cut} missing from live states"
        replayed_ok += 1

    offline = run_simulated_session(cluster, user, refs, config, seed=seed)
    offline_bytes = canonical_json(offline.final_json).encode()
    service_bytes = canonical_json(handle.engine.final_summary_json()).encode()
    assert offline_bytes == service_bytes
    _report(
        f"service replay: {replayed_ok}/{len(events)} crash points reconstruct live "
        "state; offline and scripted-service final summaries byte-identical"
    )
