"""Triple-oriented beam search over a sentence's attention matrix.

A search is anchored by an argument pair: a start span [S] and an end
span [E]. The beam grows a token path one token at a time, where the step
from frontier f to next token t is weighted by ``attention[t][f]`` (the
next token attending back to the frontier), and a candidate completes when
it takes the terminal step into [E]. Paths are confined to one of three
position regions relative to the anchors (between them, left of both, or
right of both); each region runs its own beam and results merge by score.

A candidate's score is the geometric mean of its step weights, so longer
paths are not penalized for length alone; a zero-weight step kills the
candidate outright. Steps into or out of a multi-token span take the
maximum weight over the span's tokens. Within a region, path token indices
are strictly increasing, so an emitted relation reads in sentence order.

Pluggable constraints restrict which tokens the beam may emit: OPEN allows
the whole region, while RELATION_LINKED and CANDIDATE_NP confine emission
to annotated spans (linked relation phrases, candidate noun phrases).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from triplex.bundle import (
    AnnotationKind,
    AttentionMatrix,
    SentenceBundle,
    TokenSpan,
    Triple,
)


class PositionMode(str, Enum):
    BETWEEN = "BETWEEN"
    LEFT_OF_BOTH = "LEFT_OF_BOTH"
    RIGHT_OF_BOTH = "RIGHT_OF_BOTH"


# Canonical iteration order: deterministic merges regardless of set literals.
ALL_MODES = (PositionMode.BETWEEN, PositionMode.LEFT_OF_BOTH,
             PositionMode.RIGHT_OF_BOTH)


class ConstraintVariant(str, Enum):
    OPEN = "OPEN"
    RELATION_LINKED = "RELATION_LINKED"
    CANDIDATE_NP = "CANDIDATE_NP"


@dataclass(frozen=True)
class SearchConstraint:
    """Restriction of which tokens the beam may emit."""

    variant: ConstraintVariant = ConstraintVariant.OPEN
    allowed_spans: tuple[TokenSpan, ...] = ()

    def __post_init__(self):
        if self.variant is not ConstraintVariant.OPEN and not self.allowed_spans:
            # An empty allowed set is legal; it just yields no candidates.
            pass

    def allowed_indices(self) -> Optional[frozenset[int]]:
        """Token indices the constraint admits, or None for OPEN."""
        if self.variant is ConstraintVariant.OPEN:
            return None
        allowed: set[int] = set()
        for span in self.allowed_spans:
            allowed.update(span.indices())
        return frozenset(allowed)


OPEN_CONSTRAINT = SearchConstraint()


@dataclass(frozen=True)
class BeamParams:
    beam_size: int = 6
    max_steps: int = 10
    position_modes: tuple[PositionMode, ...] = ALL_MODES
    per_pair_cap: Optional[int] = None
    include_terminal_step: bool = True
    allow_empty_relation: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.position_modes:
            raise ValueError("at least one position mode is required")


@dataclass(frozen=True)
class ArgumentPair:
    """Anchor spans for one search: s_span is [S], e_span is [E]."""

    s_span: TokenSpan
    e_span: TokenSpan

    def __post_init__(self):
        if self.s_span.overlaps(self.e_span):
            raise ValueError(f"anchor spans overlap: {self.s_span} / {self.e_span}")


@dataclass(frozen=True)
class PartialCandidate:
    """Beam state: an unfinished token path rooted at [S]."""

    token_path: tuple[int, ...]
    log_score: float

    @property
    def frontier(self) -> Optional[int]:
        return self.token_path[-1] if self.token_path else None


@dataclass(frozen=True)
class TripleCandidate:
    """A completed search path packaged as a candidate triple."""

    triple: Triple
    search_score: float
    position_mode: PositionMode
    token_path: tuple[int, ...]
    pair: ArgumentPair
    rank_score: Optional[float] = None

    def with_rank_score(self, rank_score: float) -> "TripleCandidate":
        return replace(self, rank_score=rank_score)


def mode_region(pair: ArgumentPair, mode: PositionMode, size: int) -> range:
    """Token indices a path may occupy for the given position mode."""
    left_edge = min(pair.s_span.start, pair.e_span.start)
    right_edge = max(pair.s_span.end, pair.e_span.end)
    if mode is PositionMode.BETWEEN:
        return range(min(pair.s_span.end, pair.e_span.end),
                     max(pair.s_span.start, pair.e_span.start))
    if mode is PositionMode.LEFT_OF_BOTH:
        return range(0, left_edge)
    return range(right_edge, size)


def _span_enter_weight(att: np.ndarray, span: TokenSpan, token: int) -> float:
    """Weight of stepping from a span to a token: max over the span's tokens."""
    return float(att[token, span.start:span.end].max())


def _span_exit_weight(att: np.ndarray, span: TokenSpan, frontier: int) -> float:
    """Weight of the terminal step from a frontier token into a span."""
    return float(att[span.start:span.end, frontier].max())


def sequence_score(path: Sequence[int], attention: AttentionMatrix,
                   pair: ArgumentPair, include_terminal: bool = True) -> float:
    """Geometric mean of the step weights along a path from [S] to [E].

    Steps are [S]->path[0], consecutive path steps, and (unless excluded)
    the terminal step path[-1]->[E]. Any zero step weight collapses the
    score to 0. An empty path is scored only as the single direct step
    [S]->[E].
    """
    att = attention.weights
    weights: list[float] = []
    if not path:
        weights.append(float(att[pair.e_span.start:pair.e_span.end,
                                 pair.s_span.start:pair.s_span.end].max()))
    else:
        weights.append(_span_enter_weight(att, pair.s_span, path[0]))
        for prev, nxt in zip(path, path[1:]):
            weights.append(float(att[nxt, prev]))
        if include_terminal:
            weights.append(_span_exit_weight(att, pair.e_span, path[-1]))
    if not weights:
        return 0.0
    if any(w <= 0.0 for w in weights):
        return 0.0
    return math.exp(math.fsum(math.log(w) for w in weights) / len(weights))


def _candidate_sort_key(score: float, path: tuple[int, ...]):
    # Total order: higher score, then shorter path, then smaller last token
    # index, then lexicographic path. Makes pruning and output deterministic.
    return (-score, len(path), path[-1] if path else -1, path)


def beam_search(
    attention: AttentionMatrix,
    pair: ArgumentPair,
    params: BeamParams,
    constraint: SearchConstraint = OPEN_CONSTRAINT,
    tokens: Optional[Sequence[str]] = None,
) -> list[TripleCandidate]:
    """Run one beam per requested position mode and merge results by score.

    Returns at most ``beam_size`` completed candidates per mode (then the
    per-pair cap, if any), sorted by search score descending under the
    documented total order. Token surfaces are filled in when ``tokens``
    is provided; otherwise placeholder surfaces based on indices are used.
    """
    size = attention.size
    if pair.s_span.end > size or pair.e_span.end > size:
        raise ValueError(f"anchor spans exceed matrix size {size}")
    att = attention.weights
    allowed = constraint.allowed_indices()

    merged: list[TripleCandidate] = []
    for mode in ALL_MODES:
        if mode not in params.position_modes:
            continue
        region = mode_region(pair, mode, size)
        emit = [t for t in region if allowed is None or t in allowed]
        completed: list[tuple[float, tuple[int, ...]]] = []

        if params.allow_empty_relation and mode is PositionMode.BETWEEN:
            empty_score = sequence_score((), attention, pair,
                                         params.include_terminal_step)
            if empty_score > 0.0:
                completed.append((empty_score, ()))

        beam: list[PartialCandidate] = [PartialCandidate((), 0.0)]
        for _ in range(params.max_steps):
            expansions: list[PartialCandidate] = []
            for cand in beam:
                frontier = cand.frontier
                for t in emit:
                    if frontier is None:
                        w = _span_enter_weight(att, pair.s_span, t)
                    elif t > frontier:
                        w = float(att[t, frontier])
                    else:
                        continue
                    if w <= 0.0:
                        continue
                    nxt = PartialCandidate(cand.token_path + (t,),
                                           cand.log_score + math.log(w))
                    expansions.append(nxt)
                    # Every proposal may produce [E] and complete, whether or
                    # not it survives pruning; completion never occupies a
                    # beam slot. Reaching [E] requires attention mass even
                    # when the terminal step is excluded from the score.
                    exit_w = _span_exit_weight(att, pair.e_span, t)
                    if exit_w <= 0.0:
                        continue
                    score = sequence_score(nxt.token_path, attention, pair,
                                           params.include_terminal_step)
                    if score > 0.0:
                        completed.append((score, nxt.token_path))
            if not expansions:
                break
            expansions.sort(key=lambda c: _candidate_sort_key(
                c.log_score, c.token_path))
            beam = expansions[:params.beam_size]

        completed.sort(key=lambda item: _candidate_sort_key(item[0], item[1]))
        for score, path in completed[:params.beam_size]:
            merged.append(_build_candidate(pair, mode, path, score, tokens))

    merged.sort(key=lambda c: _candidate_sort_key(c.search_score, c.token_path))
    if params.per_pair_cap is not None:
        merged = merged[:params.per_pair_cap]
    return merged


def _surface(tokens: Optional[Sequence[str]], indices: Sequence[int]) -> str:
    if tokens is None:
        return " ".join(f"<{i}>" for i in indices)
    return " ".join(tokens[i] for i in indices)


def _build_candidate(pair: ArgumentPair, mode: PositionMode,
                     path: tuple[int, ...], score: float,
                     tokens: Optional[Sequence[str]]) -> TripleCandidate:
    head = _surface(tokens, pair.s_span.indices())
    tail = _surface(tokens, pair.e_span.indices())
    relation = _surface(tokens, path) if path else "<empty>"
    triple = Triple(head=head, relation=relation, tail=tail,
                    head_span=pair.s_span, tail_span=pair.e_span,
                    relation_path=path)
    return TripleCandidate(triple=triple, search_score=score,
                           position_mode=mode, token_path=path, pair=pair)


def enumerate_argument_pairs(bundle: SentenceBundle, task: str) -> list[ArgumentPair]:
    """Anchor pairs for a task, realizing search bidirectionality.

    * ``oie``: every ordered pair of distinct NP annotations (both
      orderings, so relations left or right of the pair are reachable from
      either anchor). Fewer than two NPs yields an empty list.
    * ``rc``: the single (head, tail) gold pair; the first GOLD annotation
      in manifest order is the head.
    * ``fp``: every (gold-head NP, relation-link span) combination;
      overlapping combinations are skipped. Missing gold heads is an
      error; missing links yields an empty list (the adapter abstains).
    """
    if task == "oie":
        nps = [a.span for a in bundle.spans_of_kind(AnnotationKind.NP)]
        pairs = []
        for i, s in enumerate(nps):
            for j, e in enumerate(nps):
                if i != j and not s.overlaps(e):
                    pairs.append(ArgumentPair(s_span=s, e_span=e))
        return pairs
    if task == "rc":
        golds = bundle.spans_of_kind(AnnotationKind.GOLD)
        if len(golds) < 2:
            raise ValueError(
                f"relation classification needs head and tail GOLD annotations; "
                f"sentence {bundle.sentence_id!r} has {len(golds)}"
            )
        return [ArgumentPair(s_span=golds[0].span, e_span=golds[1].span)]
    if task == "fp":
        heads = bundle.spans_of_kind(AnnotationKind.GOLD_NP)
        if not heads:
            raise ValueError(
                f"factual probe needs GOLD_NP head candidates; sentence "
                f"{bundle.sentence_id!r} has none"
            )
        links = bundle.spans_of_kind(AnnotationKind.RELATION_LINK)
        pairs = []
        seen: set[tuple[TokenSpan, TokenSpan]] = set()
        for head in heads:
            for link in links:
                if head.span.overlaps(link.span):
                    continue
                key = (head.span, link.span)
                if key in seen:
                    continue
                seen.add(key)
                pairs.append(ArgumentPair(s_span=head.span, e_span=link.span))
        return pairs
    raise ValueError(f"unknown task {task!r}")
