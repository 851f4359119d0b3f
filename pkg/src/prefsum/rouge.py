"""Recall-oriented n-gram and LCS overlap scores for summary evaluation.

ROUGE-N sums clipped n-gram matches over all references and divides by the
total reference n-gram count.  ROUGE-L is LCS recall, aggregated by max
over references.  An optional truncation cap (75 tokens by convention)
trims the candidate before matching.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ValidationError

TRUNCATION_DEFAULT = 75


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    n: int,
    truncation: Optional[int] = None,
) -> float:
    """Clipped n-gram recall of `candidate` against all references."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not references:
        raise ValidationError("reference set is empty")
    if truncation is not None:
        candidate = candidate[:truncation]
    cand_counts = _ngrams(candidate, n)
    matched = 0
    total = 0
    for ref in references:
        ref_counts = _ngrams(ref, n)
        total += sum(ref_counts.values())
        for gram, count in ref_counts.items():
            matched += min(count, cand_counts.get(gram, 0))
    if total == 0:
        return 0.0
    return matched / total


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    truncation: Optional[int] = None,
) -> float:
    """LCS recall against each reference, aggregated by max."""
    if not references:
        raise ValidationError("reference set is empty")
    if truncation is not None:
        candidate = candidate[:truncation]
    best = 0.0
    for ref in references:
        if not ref:
            continue
        best = max(best, _lcs_length(candidate, ref) / len(ref))
    return best


@dataclass(frozen=True)
class RougeScore:
    rouge1: float
    rouge2: float
    rougeL: float
    mode: str = "recall"
    truncation: Optional[int] = None


def score_all(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    truncation: Optional[int] = None,
) -> RougeScore:
    return RougeScore(
        rouge1=rouge_n(candidate, references, 1, truncation),
        rouge2=rouge_n(candidate, references, 2, truncation),
        rougeL=rouge_l(candidate, references, truncation),
        truncation=truncation,
    )
