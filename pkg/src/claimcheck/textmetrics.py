"""Text-alignment and label-agreement metrics.

Pinned variants, since the metric names alone underdetermine behaviour:

* BLEU: clipped n-gram precisions up to min(4, len(candidate)), geometric
  mean, brevity penalty exp(1 - r/c), add-1 smoothing applied only to
  zero clipped counts.
* ROUGE-L: LCS-based precision/recall with the balanced F1.
* METEOR (lite): exact-match unigrams only, F = 10PR/(R+9P), fragmentation
  penalty 0.5*(chunks/matches)^3; no stemming or synonym stages.

Embeddings are inputs here, never computed: cosine scores whatever
vectors the caller provides.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

VALID_LABELS = ("marketing", "organizational", "rejected")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Deterministic whitespace tokenizer."""
    if lowercase:
        text = text.lower()
    return text.split()


def cosine(u: list[float], v: list[float]) -> float:
    """dot(u, v) / (|u| |v|); undefined (raises) for zero vectors."""
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    dot = sum(a * b for a, b in zip(u, v))
    norm_u = math.sqrt(sum(a * a for a in u))
    norm_v = math.sqrt(sum(b * b for b in v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return dot / (norm_u * norm_v)


def lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token_a in a:
        cur = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: list[str], reference: list[str]) -> dict[str, float]:
    """LCS precision/recall/F1. Both empty scores 1; one empty scores 0."""
    if not candidate and not reference:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    if not candidate or not reference:
        return {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    if precision + recall == 0.0:
        return {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    return {"precision": precision, "recall": recall,
            "f1": 2 * precision * recall / (precision + recall)}


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: list[str], references: list[list[str]], max_n: int = 4) -> float:
    if not candidate:
        return 0.0
    if not references:
        raise ValueError("bleu requires at least one reference")

    log_sum = 0.0
    orders = range(1, min(max_n, len(candidate)) + 1)
    for n in orders:
        cand_counts = _ngrams(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngrams(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        total = sum(cand_counts.values())
        if clipped == 0:
            precision = (clipped + 1) / (total + 1)
        else:
            precision = clipped / total
        log_sum += math.log(precision)
    geo_mean = math.exp(log_sum / len(list(orders)))

    c = len(candidate)
    r = min((len(ref) for ref in references), key=lambda L: (abs(L - c), L))
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * geo_mean


def _greedy_alignment(candidate: list[str], reference: list[str]) -> list[tuple[int, int]]:
    """Match candidate tokens left-to-right to the earliest unused
    reference occurrence. Yields sum(min counts) matches."""
    positions: dict[str, list[int]] = {}
    for j, token in enumerate(reference):
        positions.setdefault(token, []).append(j)
    used_from: dict[str, int] = {}
    pairs = []
    for i, token in enumerate(candidate):
        occurrences = positions.get(token, [])
        cursor = used_from.get(token, 0)
        if cursor < len(occurrences):
            pairs.append((i, occurrences[cursor]))
            used_from[token] = cursor + 1
    return pairs


def meteor_lite(candidate: list[str], reference: list[str]) -> float:
    if not candidate or not reference:
        return 0.0
    if candidate == reference:
        # Identical sequences score exactly 1; the fragmentation penalty
        # only measures reordering between differing sequences.
        return 1.0
    pairs = _greedy_alignment(candidate, reference)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(candidate)
    recall = m / len(reference)
    f_score = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (_, prev_ref), (_, cur_ref) in zip(pairs, pairs[1:]):
        if cur_ref != prev_ref + 1:
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return f_score * (1 - penalty)


@dataclass(frozen=True)
class AgreementResult:
    agreement_rate: float
    acceptance_rate_a: float
    acceptance_rate_b: float


def agreement(labels_a: list[str], labels_b: list[str]) -> AgreementResult:
    """Positional agreement between two aligned label sequences."""
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label sequences differ in length: {len(labels_a)} vs {len(labels_b)}")
    if not labels_a:
        raise ValueError("empty label sequences")
    for seq in (labels_a, labels_b):
        bad = [x for x in seq if x not in VALID_LABELS]
        if bad:
            raise ValueError(f"unknown labels: {bad[:3]}")
    n = len(labels_a)
    matches = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    return AgreementResult(
        agreement_rate=matches / n,
        acceptance_rate_a=sum(1 for a in labels_a if a != "rejected") / n,
        acceptance_rate_b=sum(1 for b in labels_b if b != "rejected") / n,
    )


@dataclass
class PairScores:
    pair_id: str
    rouge_precision: float
    rouge_recall: float
    rouge_f1: float
    bleu: float
    meteor: float
    cosine: float | None = None


def score_pair(pair_id: str, candidate: str, reference: str,
               candidate_vec: list[float] | None = None,
               reference_vec: list[float] | None = None) -> PairScores:
    cand, ref = tokenize(candidate), tokenize(reference)
    rouge = rouge_l(cand, ref)
    cos = None
    if candidate_vec is not None and reference_vec is not None:
        cos = cosine(candidate_vec, reference_vec)
    return PairScores(
        pair_id=pair_id,
        rouge_precision=rouge["precision"],
        rouge_recall=rouge["recall"],
        rouge_f1=rouge["f1"],
        bleu=bleu(cand, [ref]),
        meteor=meteor_lite(cand, ref),
        cosine=cos,
    )


def summarize(scores: list[PairScores], pairs: list[tuple[list[str], list[str]]]) -> dict:
    """Mean-over-pairs and pooled (count-level) aggregates.

    Reported separately because per-pair means and pooled counts answer
    different questions and neither convention is universal.
    """
    if not scores:
        return {}

    def mean(values: list[float]) -> float:
        return sum(values) / len(values)

    pooled_lcs = sum(lcs_length(c, r) for c, r in pairs)
    pooled_cand = sum(len(c) for c, _ in pairs)
    pooled_ref = sum(len(r) for _, r in pairs)
    pooled_p = pooled_lcs / pooled_cand if pooled_cand else 0.0
    pooled_r = pooled_lcs / pooled_ref if pooled_ref else 0.0
    pooled_f1 = (2 * pooled_p * pooled_r / (pooled_p + pooled_r)) if pooled_p + pooled_r else 0.0

    cosines = [s.cosine for s in scores if s.cosine is not None]
    return {
        "mean": {
            "rouge_f1": mean([s.rouge_f1 for s in scores]),
            "bleu": mean([s.bleu for s in scores]),
            "meteor": mean([s.meteor for s in scores]),
            "cosine": mean(cosines) if cosines else None,
        },
        "pooled": {
            "rouge_f1": pooled_f1,
            "bleu": _pooled_bleu(pairs),
            "meteor": mean([s.meteor for s in scores]),  # no pooled form; mean repeated
            "cosine": mean(cosines) if cosines else None,
        },
    }


def _pooled_bleu(pairs: list[tuple[list[str], list[str]]], max_n: int = 4) -> float:
    """Corpus-level BLEU: n-gram counts pooled before the geometric mean."""
    total_c = sum(len(c) for c, _ in pairs)
    total_r = sum(len(r) for _, r in pairs)
    if total_c == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n in range(1, max_n + 1):
        clipped = 0
        total = 0
        for cand, ref in pairs:
            cand_counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            clipped += sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
            total += sum(cand_counts.values())
        if total == 0:
            continue
        orders += 1
        precision = (clipped + 1) / (total + 1) if clipped == 0 else clipped / total
        log_sum += math.log(precision)
    if orders == 0:
        return 0.0
    bp = 1.0 if total_c > total_r else math.exp(1 - total_r / total_c)
    return bp * math.exp(log_sum / orders)
