"""Text and structured-output metrics.

All text metrics share one normalization: lowercase, delete punctuation
characters, split on whitespace. Scores are per-example; the eval harness
averages them and micro-averages entity counts.
"""

from __future__ import annotations

import math
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass
from statistics import mean, pstdev
from typing import Iterable, Sequence

from .model import DialogueState, GraphPath

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)

BLEU_EPSILON = 1e-9


def normalize_tokens(text: str) -> list[str]:
    return text.lower().translate(_PUNCT_TABLE).split()


def unigram_f1(prediction: str, reference: str) -> float:
    """Multiset token overlap F1."""
    pred = Counter(normalize_tokens(prediction))
    ref = Counter(normalize_tokens(reference))
    overlap = sum((pred & ref).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(pred.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


def kf1(prediction: str, knowledge: str) -> float:
    """Unigram F1 of the response against the grounding knowledge text."""
    return unigram_f1(prediction, knowledge)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(prediction: str, reference: str) -> float:
    """Sentence BLEU-4 with epsilon smoothing on zero counts.

    Precisions with a zero numerator or denominator fall back to 1e-9; the
    brevity penalty is exp(1 - r/c) when the prediction is shorter.
    """
    pred = normalize_tokens(prediction)
    ref = normalize_tokens(reference)
    if not pred:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        pred_ngrams = _ngrams(pred, n)
        total = sum(pred_ngrams.values())
        clipped = sum((pred_ngrams & _ngrams(ref, n)).values())
        precision = clipped / total if total and clipped else BLEU_EPSILON
        log_sum += math.log(precision)
    brevity = 1.0 if len(pred) >= len(ref) else math.exp(1 - len(ref) / len(pred))
    return brevity * math.exp(log_sum / 4)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, start=1):
            row.append(prev[j - 1] + 1 if x == y else max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def rouge_l(prediction: str, reference: str) -> float:
    """Longest-common-subsequence F-measure with equal P/R weighting."""
    pred = normalize_tokens(prediction)
    ref = normalize_tokens(reference)
    lcs = _lcs_length(pred, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def detect_entities(text: str, global_entities: Iterable[str]) -> list[str]:
    """Entities from the global list found in the text, longest match first.

    Matched spans are masked so shorter entities cannot re-match inside a
    longer one. Comparison is case-insensitive.
    """
    haystack = text.lower()
    found: list[str] = []
    for entity in sorted(set(global_entities), key=lambda e: (-len(e), e)):
        needle = entity.lower()
        if not needle:
            continue
        pos = haystack.find(needle)
        if pos == -1:
            continue
        found.append(entity)
        while pos != -1:
            haystack = haystack[:pos] + "\x00" * len(needle) + haystack[pos + len(needle) :]
            pos = haystack.find(needle)
    return found


def entity_counts(
    prediction: str, gold_entities: Iterable[str], global_entities: Iterable[str]
) -> tuple[int, int, int]:
    """(true positives, false positives, false negatives) for one response."""
    detected = {e.lower() for e in detect_entities(prediction, global_entities)}
    gold = {e.lower() for e in gold_entities}
    tp = len(detected & gold)
    return tp, len(detected) - tp, len(gold) - tp


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def entity_f1(
    prediction: str, gold_entities: Iterable[str], global_entities: Iterable[str]
) -> float:
    """Per-example entity F1 against the detected-entity set."""
    return f1_from_counts(*entity_counts(prediction, gold_entities, global_entities))


def _normalize_state(state: DialogueState) -> dict[str, str]:
    return {k: v.strip().lower() for k, v in state.items()}


def jga(
    predicted: Sequence[DialogueState], gold: Sequence[DialogueState]
) -> dict[str, float]:
    """Joint goal accuracy and per-slot accuracy over aligned turn states."""
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predicted states vs {len(gold)} gold")
    if not gold:
        raise ValueError("jga needs at least one turn")
    joint_hits = 0
    slot_hits = 0
    slot_total = 0
    for pred_state, gold_state in zip(predicted, gold):
        pred_n = _normalize_state(pred_state)
        gold_n = _normalize_state(gold_state)
        if pred_n == gold_n:
            joint_hits += 1
        for key in set(pred_n) | set(gold_n):
            slot_total += 1
            if key in pred_n and key in gold_n and pred_n[key] == gold_n[key]:
                slot_hits += 1
    return {
        "jga": joint_hits / len(gold),
        "slot_accuracy": slot_hits / slot_total if slot_total else 1.0,
    }


def path_recall_at_k(
    ranked: Sequence[GraphPath], gold: GraphPath, ks: Iterable[int]
) -> dict[str, float]:
    """Whole-path and final-target hit rates within the top k."""
    results: dict[str, float] = {}
    for k in ks:
        top = ranked[:k]
        results[f"path@{k}"] = float(any(p.hops == gold.hops for p in top))
        results[f"target@{k}"] = float(any(p.target == gold.target for p in top))
    return results


def rprec(predicted_title: str, gold_title: str) -> float:
    """Exact title match after NFC normalization, trimming, and casefolding."""

    def canon(s: str) -> str:
        return unicodedata.normalize("NFC", s).strip().casefold()

    return float(canon(predicted_title) == canon(gold_title))


@dataclass(frozen=True)
class MetricSummary:
    """Across-run aggregate; std is the population standard deviation."""

    mean: float
    std: float
    run_values: tuple[float, ...]


def summarize_runs(values: Sequence[float]) -> MetricSummary:
    if not values:
        raise ValueError("cannot summarize zero runs")
    return MetricSummary(
        mean=mean(values),
        std=pstdev(values) if len(values) > 1 else 0.0,
        run_values=tuple(values),
    )
