"""Document cluster ingestion, concept extraction, and concept features.

A cluster is a set of plain-text documents on one topic.  Text is segmented
into sentences, tokenized, and reduced to *concepts* at a configurable unit
(unigram, bigram, or whole sentence).  Concepts for the unigram and bigram
units live on the content-token stream (stopwords removed); sentence units
use the full token sequence.  Each concept can then be annotated with a
fixed-schema feature vector, min-max normalized per cluster.

All of this is deterministic: the same bytes and unit always produce the
same cluster.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ValidationError

UNITS = ("unigram", "bigram", "sentence")

# Schema order doubles as the feature-importance order used when analyses
# restrict the ranker to a feature prefix.
FEATURE_NAMES = (
    "tfidf",
    "signature",
    "docfreq",
    "cooccur",
    "embed_cos",
    "position",
    "sent_len",
    "unit_len",
    "uppercase",
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TOKEN_SPLIT = re.compile(r"[^0-9a-zA-Z]+")

_STOPWORDS: Optional[frozenset] = None
_BACKGROUND: Optional[tuple] = None


def stopwords() -> frozenset:
    """The bundled fixed stopword list (lowercase)."""
    global _STOPWORDS
    if _STOPWORDS is None:
        text = resources.files("prefsum.data").joinpath("stopwords.txt").read_text()
        _STOPWORDS = frozenset(w.strip() for w in text.splitlines() if w.strip())
    return _STOPWORDS


def background_counts() -> tuple:
    """Bundled background unigram table: (mapping word -> count, total)."""
    global _BACKGROUND
    if _BACKGROUND is None:
        text = resources.files("prefsum.data").joinpath("background_counts.txt").read_text()
        counts = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            word, count = line.split()
            counts[word] = int(count)
        _BACKGROUND = (counts, sum(counts.values()))
    return _BACKGROUND


def tokenize(text: str) -> list:
    """Lowercase tokens, split on non-alphanumeric runs."""
    return [t.lower() for t in _TOKEN_SPLIT.split(text) if t]


def split_sentences(text: str) -> list:
    """Split on ., !, ? followed by whitespace.  No abbreviation handling."""
    return [s for s in (p.strip() for p in _SENTENCE_SPLIT.split(text)) if s]


def stem(word: str) -> str:
    """Crude suffix stripper: drops ing/ed/es/s when ≥ 2 chars remain."""
    for suffix in ("ing", "ed", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 2:
            return word[: -len(suffix)]
    return word


def content_tokens(tokens: Iterable[str]) -> list:
    sw = stopwords()
    return [t for t in tokens if t not in sw]


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index_in_doc: int
    index_in_cluster: int
    tokens: tuple
    content: tuple  # tokens with stopwords removed
    position_ratio: float

    @property
    def length(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Concept:
    id: int
    unit: str
    surface: str
    sentence_ids: frozenset
    features: Optional[np.ndarray] = None

    @property
    def tokens(self) -> tuple:
        return tuple(self.surface.split())


@dataclass
class Document:
    id: str
    text: str


@dataclass
class DocumentCluster:
    id: str
    documents: list
    sentences: list
    concepts: list
    unit: str
    references: list = field(default_factory=list)
    feature_names: tuple = FEATURE_NAMES

    @property
    def num_concepts(self) -> int:
        return len(self.concepts)

    def concept_by_id(self, cid: int) -> Concept:
        return self.concepts[cid]

    def sentence_concepts(self, sentence_id: int) -> frozenset:
        """Ids of concepts occurring in the given sentence."""
        return frozenset(c.id for c in self.concepts if sentence_id in c.sentence_ids)


class EmbeddingTable:
    """Word vectors loaded from a `word v1 ... vd` text file."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        dims = {v.shape for v in vectors.values()}
        if len(dims) > 1:
            raise ValidationError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.vectors = {w: np.asarray(v, dtype=float) for w, v in vectors.items()}
        self.dim = next(iter(dims))[0] if dims else 0

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        vectors = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                parts = line.split()
                if not parts:
                    continue
                word, values = parts[0], parts[1:]
                if not values:
                    raise ValidationError(f"{path}:{lineno}: no vector components")
                vectors[word.lower()] = np.array([float(v) for v in values])
        return cls(vectors)

    def mean_vector(self, tokens: Iterable[str]) -> Optional[np.ndarray]:
        hits = [self.vectors[t] for t in tokens if t in self.vectors]
        if not hits:
            return None
        return np.mean(hits, axis=0)


def _capitalized_tokens(text: str) -> set:
    """Lowercased tokens that appear with an uppercase first letter anywhere."""
    caps = set()
    for raw in _TOKEN_SPLIT.split(text):
        if raw and raw[0].isupper():
            caps.add(raw.lower())
    return caps


def build_cluster(
    cluster_id: str,
    documents: Sequence,
    unit: str,
    references: Sequence = (),
) -> DocumentCluster:
    """Assemble a cluster from (doc_id, text) pairs at the given concept unit."""
    if unit not in UNITS:
        raise ValidationError(f"unknown concept unit {unit!r}; expected one of {UNITS}")
    if not documents:
        raise ValidationError("cluster has no documents")

    sentences: list = []
    docs: list = []
    capitalized: set = set()
    for doc_id, text in documents:
        doc_sents = split_sentences(text)
        capitalized |= _capitalized_tokens(text)
        kept = []
        for raw in doc_sents:
            tokens = tokenize(raw)
            if not tokens:
                continue
            kept.append(tokens)
        for i, tokens in enumerate(kept):
            ratio = 0.0 if len(kept) == 1 else i / (len(kept) - 1)
            sentences.append(
                Sentence(
                    doc_id=doc_id,
                    index_in_doc=i,
                    index_in_cluster=len(sentences),
                    tokens=tuple(tokens),
                    content=tuple(content_tokens(tokens)),
                    position_ratio=ratio,
                )
            )
        docs.append(Document(id=doc_id, text=text))
    if not sentences:
        raise ValidationError(f"cluster {cluster_id!r} contains no sentences")

    concepts = _extract_concepts(sentences, unit)
    cluster = DocumentCluster(
        id=cluster_id,
        documents=docs,
        sentences=sentences,
        concepts=concepts,
        unit=unit,
        references=list(references),
    )
    cluster._capitalized = capitalized  # consumed by featurize_concepts
    return cluster


def _extract_concepts(sentences: Sequence, unit: str) -> list:
    """Distinct surfaces in order of first appearance, with occurrence sets."""
    occurrences: dict = {}
    order: list = []
    for sent in sentences:
        if unit == "sentence":
            surfaces = [" ".join(sent.tokens)]
        elif unit == "unigram":
            surfaces = list(sent.content)
        else:
            surfaces = [
                f"{sent.content[i]} {sent.content[i + 1]}"
                for i in range(len(sent.content) - 1)
            ]
        for surface in surfaces:
            if surface not in occurrences:
                occurrences[surface] = set()
                order.append(surface)
            occurrences[surface].add(sent.index_in_cluster)
    return [
        Concept(id=i, unit=unit, surface=s, sentence_ids=frozenset(occurrences[s]))
        for i, s in enumerate(order)
    ]


def ingest_cluster(path, unit: str) -> DocumentCluster:
    """Load a cluster from a directory (docs/*.txt, refs/*.txt) or a JSON file."""
    path = Path(path)
    if path.is_dir():
        doc_dir = path / "docs"
        if not doc_dir.is_dir():
            raise ValidationError(f"{path} has no docs/ directory")
        documents = [
            (p.stem, p.read_text(encoding="utf-8"))
            for p in sorted(doc_dir.glob("*.txt"))
        ]
        refs = [
            p.read_text(encoding="utf-8")
            for p in sorted((path / "refs").glob("*.txt"))
        ] if (path / "refs").is_dir() else []
        return build_cluster(path.name, documents, unit, refs)

    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    try:
        documents = [(d["id"], d["text"]) for d in data["documents"]]
        cluster_id = data["id"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed cluster file: {exc}") from exc
    return build_cluster(cluster_id, documents, unit, data.get("references", []))


def cluster_to_json(cluster: DocumentCluster) -> dict:
    return {
        "id": cluster.id,
        "documents": [{"id": d.id, "text": d.text} for d in cluster.documents],
        "references": list(cluster.references),
        "unit": cluster.unit,
    }


def cluster_from_json(data: Mapping, unit: Optional[str] = None) -> DocumentCluster:
    documents = [(d["id"], d["text"]) for d in data["documents"]]
    return build_cluster(
        data["id"], documents, unit or data.get("unit", "unigram"),
        data.get("references", []),
    )


def count_candidate_pairs(cluster: DocumentCluster) -> int:
    """Number of distinct unordered concept pairs, N(N-1)/2."""
    n = cluster.num_concepts
    if n < 2:
        raise ValidationError(f"need at least 2 concepts, cluster has {n}")
    return n * (n - 1) // 2


def _log_likelihood(k: float, n: float, p: float) -> float:
    p = min(max(p, 1e-12), 1 - 1e-12)
    out = 0.0
    if k > 0:
        out += k * math.log(p)
    if n - k > 0:
        out += (n - k) * math.log(1 - p)
    return out


def featurize_concepts(
    cluster: DocumentCluster,
    embeddings: Optional[EmbeddingTable] = None,
) -> DocumentCluster:
    """Attach the surface-level feature vector to every concept.

    Features (see FEATURE_NAMES): TF-IDF, signature-word log-likelihood
    ratio, document frequency, co-occurring concept count, mean embedding
    cosine to the cluster centroid (0 without embeddings), best (earliest)
    sentence position ratio, mean containing-sentence length, unit token
    length, and an uppercase-occurrence indicator.  All are min-max
    normalized to [0, 1] per cluster; constant columns map to 0.
    """
    concepts = cluster.concepts
    if not concepts:
        raise ValidationError("cluster has no concepts to featurize")
    sentences = cluster.sentences
    capitalized = getattr(cluster, "_capitalized", set())

    # Occurrence counts on the stream each unit is defined over.
    counts: Counter = Counter()
    doc_sets: dict = defaultdict(set)
    token_total = 0
    token_counts: Counter = Counter()
    for sent in sentences:
        token_total += len(sent.content)
        token_counts.update(sent.content)
        if cluster.unit == "sentence":
            grams = [" ".join(sent.tokens)]
        elif cluster.unit == "unigram":
            grams = list(sent.content)
        else:
            grams = [
                f"{sent.content[i]} {sent.content[i + 1]}"
                for i in range(len(sent.content) - 1)
            ]
        for g in grams:
            counts[g] += 1
            doc_sets[g].add(sent.doc_id)

    n_docs = len(cluster.documents)
    background, bg_total = background_counts()

    def term_signature(term: str) -> float:
        k1 = token_counts.get(term, 0)
        n1 = max(token_total, 1)
        k2 = background.get(term, 0)
        n2 = bg_total
        p1, p2 = k1 / n1, k2 / n2
        if p1 <= p2:
            return 0.0
        p = (k1 + k2) / (n1 + n2)
        llr = 2 * (
            _log_likelihood(k1, n1, p1)
            + _log_likelihood(k2, n2, p2)
            - _log_likelihood(k1, n1, p)
            - _log_likelihood(k2, n2, p)
        )
        return max(llr, 0.0)

    # Concept co-occurrence: distinct other concepts sharing a sentence.
    sent_to_concepts: dict = defaultdict(set)
    for c in concepts:
        for sid in c.sentence_ids:
            sent_to_concepts[sid].add(c.id)

    centroid = None
    if embeddings is not None:
        all_content = [t for s in sentences for t in s.content]
        centroid = embeddings.mean_vector(all_content)

    raw = np.zeros((len(concepts), len(FEATURE_NAMES)))
    col = {name: i for i, name in enumerate(FEATURE_NAMES)}
    for c in concepts:
        tf = counts[c.surface]
        df = len(doc_sets[c.surface])
        idf = math.log(n_docs / df) if df else 0.0
        raw[c.id, col["tfidf"]] = tf * idf
        raw[c.id, col["docfreq"]] = df

        neighbours = set()
        for sid in c.sentence_ids:
            neighbours |= sent_to_concepts[sid]
        neighbours.discard(c.id)
        raw[c.id, col["cooccur"]] = len(neighbours)

        terms = [t for t in c.tokens if t not in stopwords()] or list(c.tokens)
        raw[c.id, col["signature"]] = float(np.mean([term_signature(t) for t in terms]))
        raw[c.id, col["uppercase"]] = float(any(t in capitalized for t in c.tokens))

        cos = 0.0
        if centroid is not None:
            vec = embeddings.mean_vector(c.tokens)
            if vec is not None:
                denom = np.linalg.norm(vec) * np.linalg.norm(centroid)
                if denom > 0:
                    cos = float(np.dot(vec, centroid) / denom)
        raw[c.id, col["embed_cos"]] = cos

        positions = [sentences[sid].position_ratio for sid in c.sentence_ids]
        lengths = [sentences[sid].length for sid in c.sentence_ids]
        raw[c.id, col["position"]] = min(positions)
        raw[c.id, col["sent_len"]] = float(np.mean(lengths))
        raw[c.id, col["unit_len"]] = len(c.tokens)

    if not np.isfinite(raw).all():
        raise ValidationError("non-finite feature value computed")
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    span = hi - lo
    normalized = np.where(span > 0, (raw - lo) / np.where(span > 0, span, 1.0), 0.0)

    new_concepts = [replace(c, features=normalized[c.id].copy()) for c in concepts]
    out = DocumentCluster(
        id=cluster.id,
        documents=cluster.documents,
        sentences=cluster.sentences,
        concepts=new_concepts,
        unit=cluster.unit,
        references=cluster.references,
        feature_names=FEATURE_NAMES,
    )
    out._capitalized = capitalized
    return out


def feature_matrix(cluster: DocumentCluster) -> np.ndarray:
    """Concept features stacked as an (N, F) array, in concept-id order."""
    rows = []
    for c in cluster.concepts:
        if c.features is None:
            raise ValidationError("cluster not featurized; call featurize_concepts")
        rows.append(c.features)
    return np.vstack(rows)


def reference_tokens(cluster: DocumentCluster) -> list:
    """Tokenized reference summaries (same tokenizer, stopwords kept)."""
    return [tokenize(ref) for ref in cluster.references]
