"""Metrics: extraction matching, PR curves with AUC, task scores, and
relation-position statistics.

Token comparison throughout evaluation is case-insensitive with
punctuation stripped. The extraction matcher is the configurable
element-overlap rule used by the standard open-extraction benchmarks:
two elements match when the shorter one's token multiset overlaps the
longer's by at least the policy fraction and (optionally) both end in the
same head token, approximated as the last non-punctuation token.
"""

from __future__ import annotations

import string
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from triplex.bundle import Triple

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_tokens(text: str) -> list[str]:
    """Lowercased, punctuation-stripped tokens; empty tokens drop out."""
    out = []
    for token in text.lower().split():
        cleaned = token.translate(_PUNCT_TABLE)
        if cleaned:
            out.append(cleaned)
    return out


@dataclass(frozen=True)
class MatchPolicy:
    """Element-overlap rule parameters for extraction matching."""

    min_overlap: float = 0.5
    require_head_match: bool = True

    def __post_init__(self):
        if not (0.0 < self.min_overlap <= 1.0):
            raise ValueError("min_overlap must be in (0, 1]")


@dataclass(frozen=True)
class ScoredExtraction:
    triple: Triple
    confidence: float


def _element_match(a: str, b: str, policy: MatchPolicy) -> bool:
    ta = normalize_tokens(a)
    tb = normalize_tokens(b)
    if not ta or not tb:
        return False
    if policy.require_head_match and ta[-1] != tb[-1]:
        return False
    shorter, longer = (ta, tb) if len(ta) <= len(tb) else (tb, ta)
    shared = sum((Counter(shorter) & Counter(longer)).values())
    return shared / len(shorter) >= policy.min_overlap


def triples_match(predicted: Triple, gold: Triple, policy: MatchPolicy) -> bool:
    return (_element_match(predicted.head, gold.head, policy)
            and _element_match(predicted.relation, gold.relation, policy)
            and _element_match(predicted.tail, gold.tail, policy))


def match_extractions(
    predicted: Sequence[ScoredExtraction],
    gold: Sequence[Triple],
    policy: MatchPolicy = MatchPolicy(),
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching in descending confidence.

    Returns (predicted index, gold index) pairs; each gold triple is
    claimed at most once.
    """
    order = sorted(range(len(predicted)),
                   key=lambda i: (-predicted[i].confidence, i))
    taken: set[int] = set()
    matches: list[tuple[int, int]] = []
    for pi in order:
        for gi, g in enumerate(gold):
            if gi in taken:
                continue
            if triples_match(predicted[pi].triple, g, policy):
                matches.append((pi, gi))
                taken.add(gi)
                break
    return matches


ExtractionGroup = tuple[Sequence[ScoredExtraction], Sequence[Triple]]


def grouped_prf_at_threshold(
    groups: Sequence[ExtractionGroup],
    policy: MatchPolicy = MatchPolicy(),
    threshold: float = 0.0,
) -> tuple[float, float, float]:
    """Precision/recall/F1 with matching confined to each (predicted, gold)
    group; confidences are comparable across groups, so counts pool
    globally. A group is typically one sentence."""
    tp = kept_total = gold_total = 0
    for predicted, gold in groups:
        kept = [p for p in predicted if p.confidence >= threshold]
        tp += len(match_extractions(kept, gold, policy))
        kept_total += len(kept)
        gold_total += len(gold)
    precision = tp / kept_total if kept_total else 0.0
    recall = tp / gold_total if gold_total else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    return precision, recall, f1


def prf_at_threshold(
    predicted: Sequence[ScoredExtraction],
    gold: Sequence[Triple],
    policy: MatchPolicy = MatchPolicy(),
    threshold: float = 0.0,
) -> tuple[float, float, float]:
    """Precision/recall/F1 over predictions at or above the threshold."""
    return grouped_prf_at_threshold([(predicted, gold)], policy, threshold)


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float

    @property
    def f1(self) -> float:
        if self.precision + self.recall == 0:
            return 0.0
        return 2 * self.precision * self.recall / (self.precision + self.recall)


@dataclass
class PRCurve:
    """PR points swept over distinct confidence thresholds, plus AUC.

    The area is the trapezoidal integral over (recall, precision),
    anchored on the left by a rectangle from recall 0 to the smallest
    observed recall at the first point's precision (curves need not start
    at recall 0).
    """

    points: list[PRPoint] = field(default_factory=list)
    auc: float = 0.0

    @property
    def best_f1_point(self) -> Optional[PRPoint]:
        if not self.points:
            return None
        return max(self.points, key=lambda p: (p.f1, p.recall))


def grouped_pr_curve(
    groups: Sequence[ExtractionGroup],
    policy: MatchPolicy = MatchPolicy(),
) -> PRCurve:
    """Dataset-level PR curve with per-group matching."""
    thresholds = sorted({p.confidence for predicted, _ in groups
                         for p in predicted}, reverse=True)
    if not thresholds:
        return PRCurve(points=[], auc=0.0)
    points = []
    for t in thresholds:
        precision, recall, _ = grouped_prf_at_threshold(groups, policy, t)
        points.append(PRPoint(threshold=t, precision=precision, recall=recall))
    return PRCurve(points=points, auc=auc_from_points(points))


def pr_curve_and_auc(
    predicted: Sequence[ScoredExtraction],
    gold: Sequence[Triple],
    policy: MatchPolicy = MatchPolicy(),
) -> PRCurve:
    """One PR point per distinct confidence value, descending."""
    return grouped_pr_curve([(predicted, gold)], policy)


def auc_from_points(points: Sequence[PRPoint]) -> float:
    """Trapezoid over (recall, precision) plus the left anchor rectangle."""
    by_recall = sorted(points, key=lambda p: (p.recall, -p.precision))
    area = by_recall[0].recall * by_recall[0].precision
    for a, b in zip(by_recall, by_recall[1:]):
        area += (b.recall - a.recall) * (a.precision + b.precision) / 2.0
    return area


def p_at_1(predictions: dict[str, Optional[str]], gold: dict[str, str]) -> float:
    """Fraction of facts whose predicted tail exactly matches gold.

    Matching is case-insensitive and whitespace-normalized; abstentions
    (None) count as wrong. Prediction and gold ids must align.
    """
    if not gold:
        raise ValueError("p@1 is undefined for an empty fact set")
    extra = set(predictions) - set(gold)
    if extra:
        raise ValueError(f"predictions for unknown fact ids: {sorted(extra)}")

    def norm(s: str) -> str:
        return " ".join(s.lower().split())

    hits = 0
    for fact_id, gold_tail in gold.items():
        pred = predictions.get(fact_id)
        if pred is not None and norm(pred) == norm(gold_tail):
            hits += 1
    return hits / len(gold)


def rc_f1(predictions: dict[str, str], gold: dict[str, str],
          null_label: Optional[str] = None) -> float:
    """Micro-F1 for relation classification.

    When a null label is given (datasets with an explicit no-relation
    class), null predictions and null gold labels count as neither
    predicted-positive nor gold-positive, following the standard scorer
    convention for such datasets.
    """
    missing = set(gold) - set(predictions)
    if missing:
        raise ValueError(f"missing predictions for ids: {sorted(missing)}")
    tp = fp = fn = 0
    for sid, gold_label in gold.items():
        pred = predictions[sid]
        pred_positive = pred != null_label if null_label is not None else True
        gold_positive = gold_label != null_label if null_label is not None else True
        if pred_positive and gold_positive and pred == gold_label:
            tp += 1
        else:
            if pred_positive:
                fp += 1
            if gold_positive:
                fn += 1
    if tp == 0 and fp == 0 and fn == 0:
        warnings.warn("no positive instances in predictions or gold; F1 set to 0",
                      stacklevel=2)
        return 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Relation-position statistics


@dataclass
class PositionCounts:
    left: int = 0
    right: int = 0
    middle: int = 0
    unlocated: int = 0

    @property
    def total(self) -> int:
        return self.left + self.right + self.middle

    @property
    def outside_fraction(self) -> float:
        if self.total == 0:
            return 0.0
        return (self.left + self.right) / self.total


def find_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> Optional[int]:
    """First start index of needle inside haystack, or None."""
    if not needle or len(needle) > len(haystack):
        return None
    for start in range(len(haystack) - len(needle) + 1):
        if list(haystack[start:start + len(needle)]) == list(needle):
            return start
    return None


def classify_relation_position(sentence: str, triple: Triple) -> Optional[str]:
    """Locate the triple's elements in the sentence and classify the relation
    as left of both arguments, right of both, or between; None when any
    element cannot be located."""
    tokens = normalize_tokens(sentence)
    spans = []
    for element in (triple.head, triple.relation, triple.tail):
        needle = normalize_tokens(element)
        start = find_subsequence(tokens, needle)
        if start is None:
            return None
        spans.append((start, start + len(needle)))
    (h_start, h_end), (r_start, r_end), (t_start, t_end) = spans
    if r_end <= min(h_start, t_start):
        return "left"
    if r_start >= max(h_end, t_end):
        return "right"
    return "middle"


def relation_position_stats(
    entries: Iterable[tuple[str, Triple]],
) -> PositionCounts:
    """Classify each (sentence, gold triple) pair's relation position.

    Unlocatable relations are counted separately and excluded from the
    three positional bins.
    """
    counts = PositionCounts()
    for sentence, triple in entries:
        bin_ = classify_relation_position(sentence, triple)
        if bin_ is None:
            counts.unlocated += 1
        else:
            setattr(counts, bin_, getattr(counts, bin_) + 1)
    return counts


# ---------------------------------------------------------------------------
# Gold file readers

GOLD_FORMAT_SPEC = "spec"
GOLD_FORMAT_OIE2016 = "oie2016"


def read_oie_gold(path: str | Path,
                  fmt: str = GOLD_FORMAT_SPEC) -> list[tuple[str, Triple]]:
    """Read an open-extraction gold file as (sentence, triple) pairs.

    ``spec`` lines are ``sentence<TAB>head<TAB>relation<TAB>tail``. The
    ``oie2016`` variant accepts the benchmark's native column order
    ``sentence<TAB>relation<TAB>arg1<TAB>arg2[<TAB>extra args...]``,
    taking the first two arguments as head and tail.
    """
    entries: list[tuple[str, Triple]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if fmt == GOLD_FORMAT_SPEC:
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: expected sentence, head, "
                                     "relation, tail")
                sentence, head, relation, tail = parts[0], parts[1], parts[2], parts[3]
            elif fmt == GOLD_FORMAT_OIE2016:
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: expected sentence, relation "
                                     "and at least two arguments")
                sentence, relation, head, tail = parts[0], parts[1], parts[2], parts[3]
            else:
                raise ValueError(f"unknown gold format {fmt!r}")
            if not head or not relation or not tail:
                raise ValueError(f"{path}:{lineno}: empty triple element")
            entries.append((sentence, Triple(head=head, relation=relation, tail=tail)))
    return entries


def read_labeled_gold(path: str | Path) -> dict[str, str]:
    """Read ``id<TAB>value`` gold files (relation labels or fact tails)."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected id<TAB>value")
            mapping[parts[0]] = parts[1]
    return mapping


def group_gold_by_sentence(
    entries: Sequence[tuple[str, Triple]],
) -> dict[str, list[Triple]]:
    """Key gold triples by whitespace-normalized, lowercased sentence text."""
    grouped: dict[str, list[Triple]] = {}
    for sentence, triple in entries:
        key = sentence_key(sentence)
        grouped.setdefault(key, []).append(triple)
    return grouped


def sentence_key(sentence: str) -> str:
    return " ".join(sentence.lower().split())
