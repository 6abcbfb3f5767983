"""Reference-based lexical scores: ROUGE-L, sentence BLEU, METEOR.

All three share one tokenizer so scores stay comparable. Implemented from
their definitions; variant choices (F1 ROUGE, reciprocal-count BLEU
smoothing, exact+stem METEOR) are fixed and recorded in report payloads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Sequence

from .errors import EmptyReferences
from .stemmer import stem

_TOKEN = re.compile(r"\w+|[^\w\s]")

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
_EXACT_ALIGN_LIMIT = 12

VARIANTS = {
    "rouge_l": "f1",
    "bleu": "sentence-n4-reciprocal-smoothing",
    "meteor": "exact+stem-alpha0.9-beta3-gamma0.5",
}


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, detach punctuation as its own token."""
    return _TOKEN.findall(text.lower())


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, float]:
    lcs = _lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return {"precision": precision, "recall": recall, "f1": f1}


def _ngrams(tokens: Sequence[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def bleu(candidate: Sequence[str], references: Iterable[Sequence[str]]) -> float:
    references = [list(r) for r in references]
    if not references:
        raise EmptyReferences("bleu needs at least one reference")
    c = len(candidate)
    if c == 0:
        return 0.0

    max_n = min(4, c)
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        total = c - n + 1
        clipped = 0
        for gram, count in cand_counts.items():
            best = max((_ngrams(ref, n).get(gram, 0) for ref in references), default=0)
            clipped += min(count, best)
        if clipped == 0:
            if n == 1:
                return 0.0
            p = 1.0 / (2.0 * total)  # reciprocal-count smoothing
        else:
            p = clipped / total
        log_sum += math.log(p)
    geometric = math.exp(log_sum / max_n)

    # brevity penalty against the closest reference length, shorter on ties
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * geometric


@lru_cache(maxsize=65536)
def _stem_cached(token: str) -> str:
    return stem(token)


def _count_chunks(pairs: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def _align_exact_dp(
    cand: Sequence[str], ref: Sequence[str]
) -> tuple[int, int, int]:
    """Best alignment by (matches, exact matches, -chunks), exhaustively.

    Position i may pair with j when stems agree; exact surface pairs are
    preferred through the objective, chunk count is minimized last.
    """
    cand_stems = [_stem_cached(t) for t in cand]
    ref_stems = [_stem_cached(t) for t in ref]
    compatible = [
        [j for j in range(len(ref)) if cand_stems[i] == ref_stems[j]]
        for i in range(len(cand))
    ]
    n = len(cand)

    memo: dict[tuple[int, int, int], tuple[int, int, int]] = {}

    def best(i: int, mask: int, last_ref: int) -> tuple[int, int, int]:
        if i == n:
            return (0, 0, 0)
        key = (i, mask, last_ref)
        cached = memo.get(key)
        if cached is not None:
            return cached
        # skip candidate position i
        result = best(i + 1, mask, -1)
        for j in compatible[i]:
            bit = 1 << j
            if mask & bit:
                continue
            m, e, negc = best(i + 1, mask | bit, j)
            new_chunk = 0 if last_ref >= 0 and j == last_ref + 1 else 1
            outcome = (
                m + 1,
                e + (1 if cand[i] == ref[j] else 0),
                negc - new_chunk,
            )
            if outcome > result:
                result = outcome
        memo[key] = result
        return result

    m, e, negc = best(0, 0, -1)
    return m, e, -negc


def _align_greedy(cand: Sequence[str], ref: Sequence[str]) -> tuple[int, int, int]:
    """Two-pass deterministic aligner for long inputs: exact pass, stem pass."""
    cand_stems = [_stem_cached(t) for t in cand]
    ref_stems = [_stem_cached(t) for t in ref]
    matched_ref: set[int] = set()
    pair_for_cand: dict[int, int] = {}

    by_surface: dict[str, list[int]] = {}
    for j, token in enumerate(ref):
        by_surface.setdefault(token, []).append(j)
    for i, token in enumerate(cand):
        options = [j for j in by_surface.get(token, ()) if j not in matched_ref]
        if options:
            prev = pair_for_cand.get(i - 1)
            choice = prev + 1 if prev is not None and prev + 1 in options else options[0]
            pair_for_cand[i] = choice
            matched_ref.add(choice)
    exact = len(pair_for_cand)

    by_stem: dict[str, list[int]] = {}
    for j, token_stem in enumerate(ref_stems):
        by_stem.setdefault(token_stem, []).append(j)
    for i in range(len(cand)):
        if i in pair_for_cand:
            continue
        options = [j for j in by_stem.get(cand_stems[i], ()) if j not in matched_ref]
        if options:
            prev = pair_for_cand.get(i - 1)
            choice = prev + 1 if prev is not None and prev + 1 in options else options[0]
            pair_for_cand[i] = choice
            matched_ref.add(choice)

    pairs = sorted(pair_for_cand.items())
    return len(pairs), exact, _count_chunks(pairs)


def meteor(candidate: Sequence[str], reference: Sequence[str]) -> float:
    if not candidate or not reference:
        return 0.0
    if list(candidate) == list(reference):
        matches, chunks = len(candidate), 1
    elif len(candidate) <= _EXACT_ALIGN_LIMIT and len(reference) <= _EXACT_ALIGN_LIMIT:
        matches, _, chunks = _align_exact_dp(candidate, reference)
    else:
        matches, _, chunks = _align_greedy(candidate, reference)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = (precision * recall) / (
        METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall
    )
    penalty = METEOR_GAMMA * (chunks / matches) ** METEOR_BETA
    return fmean * (1.0 - penalty)


@dataclass(frozen=True, slots=True)
class MetricReport:
    rouge_l: dict[str, float]
    bleu: float
    meteor: float

    def __post_init__(self) -> None:
        values = [self.bleu, self.meteor, *self.rouge_l.values()]
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("metric values must lie in [0, 1]")

    def to_payload(self) -> dict[str, Any]:
        return {
            "rouge_l": dict(self.rouge_l),
            "bleu": self.bleu,
            "meteor": self.meteor,
            "variants": dict(VARIANTS),
        }


def score_pair(candidate_text: str, reference_text: str) -> MetricReport:
    cand = tokenize(candidate_text)
    ref = tokenize(reference_text)
    return MetricReport(
        rouge_l=rouge_l(cand, ref),
        bleu=bleu(cand, [ref]),
        meteor=meteor(cand, ref),
    )


def mean_reports(reports: Sequence[MetricReport]) -> dict[str, float]:
    if not reports:
        return {"rouge_l_f1": 0.0, "bleu": 0.0, "meteor": 0.0}
    n = len(reports)
    return {
        "rouge_l_f1": sum(r.rouge_l["f1"] for r in reports) / n,
        "bleu": sum(r.bleu for r in reports) / n,
        "meteor": sum(r.meteor for r in reports) / n,
    }
