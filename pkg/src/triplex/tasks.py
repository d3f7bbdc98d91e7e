"""Per-task orchestration: encode task priors into the search, run
generate -> rank, and decode candidates into task predictions.

Open information extraction searches every ordered NP pair with no
emission constraint and emits the top-n ranked triples per pair. Relation
classification searches the single gold (head, tail) pair, confines
emission to linked relation phrases, and decodes predicates into the
task's relation category. Factual probing anchors on (gold-head NP,
linked relation phrase), confines emission to candidate tail NPs, and
decodes the top candidate's token path as the tail entity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from triplex.aliases import (
    PredicateDictionary,
    RelationLink,
    link_relation_phrases,
    predicate_to_task_relation,
)
from triplex.bundle import AnnotationKind, SentenceBundle, TokenSpan, Triple
from triplex.ranking import (
    RANKED,
    RAW_SEARCH_SCORE,
    EncoderProvider,
    linearize_triple,
    rank_candidates,
)
from triplex.search import (
    ArgumentPair,
    BeamParams,
    ConstraintVariant,
    PositionMode,
    SearchConstraint,
    TripleCandidate,
    beam_search,
    enumerate_argument_pairs,
)

TASK_OIE = "oie"
TASK_RC = "rc"
TASK_FP = "fp"


@dataclass(frozen=True)
class TaskConfig:
    """Search and decoding configuration for one task run."""

    task: str
    top_n: int
    beam: BeamParams
    ranking_mode: str = RANKED
    category: Optional[str] = None
    null_label: Optional[str] = None

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.task not in (TASK_OIE, TASK_RC, TASK_FP):
            raise ValueError(f"unknown task {self.task!r}")


def default_config(task: str, **overrides) -> TaskConfig:
    """Task defaults: beam 6 everywhere except factual probing (beam 20);
    top-1 output except relation classification, which keeps the top 10
    for hit-set scoring. Pass dev-tuned overrides (e.g. top_n=3) as needed."""
    if task == TASK_OIE:
        base = TaskConfig(task=task, top_n=1, beam=BeamParams(beam_size=6))
    elif task == TASK_RC:
        base = TaskConfig(task=task, top_n=10, beam=BeamParams(beam_size=6))
    elif task == TASK_FP:
        base = TaskConfig(task=task, top_n=1, beam=BeamParams(beam_size=20))
    else:
        raise ValueError(f"unknown task {task!r}")
    return replace(base, **overrides) if overrides else base


def candidate_confidence(candidate: TripleCandidate, ranking_mode: str) -> float:
    """Confidence in [0, 1]: rank scores map through (1 + cos) / 2 so
    thresholds are comparable across sentences; the no-ranking ablation
    keeps the raw search score."""
    if ranking_mode == RAW_SEARCH_SCORE or candidate.rank_score is None:
        return candidate.search_score
    return (1.0 + candidate.rank_score) / 2.0


@dataclass(frozen=True)
class Provenance:
    token_path: tuple[int, ...]
    position_mode: PositionMode
    s_span: TokenSpan
    e_span: TokenSpan
    search_score: float
    rank_score: Optional[float]

    @classmethod
    def of(cls, cand: TripleCandidate) -> "Provenance":
        return cls(token_path=cand.token_path, position_mode=cand.position_mode,
                   s_span=cand.pair.s_span, e_span=cand.pair.e_span,
                   search_score=cand.search_score, rank_score=cand.rank_score)


@dataclass(frozen=True)
class OiePrediction:
    triple: Triple
    confidence: float
    provenance: Provenance


@dataclass(frozen=True)
class RcPrediction:
    """Top-1 label plus the hit set decoded from the top-n ranked triples."""

    label: Optional[str]
    labels: tuple[str, ...]
    abstained: bool
    candidates: tuple[tuple[str, str, float, Provenance], ...] = ()
    # candidates: (decoded label, predicate_id, confidence, provenance)


@dataclass(frozen=True)
class FpPrediction:
    tail: Optional[str]
    predicate_id: Optional[str]
    abstained: bool
    confidence: Optional[float] = None
    provenance: Optional[Provenance] = None
    triple: Optional[Triple] = None


def run_oie(bundle: SentenceBundle, config: TaskConfig,
            provider: Optional[EncoderProvider]) -> list[OiePrediction]:
    """Open extraction: search every ordered NP pair, rank per pair, emit
    the top-n of each, ordered by confidence. Fewer than two NPs yields
    an empty extraction set."""
    token_texts = [t.text for t in bundle.tokens]
    predictions: list[OiePrediction] = []
    for pair in enumerate_argument_pairs(bundle, TASK_OIE):
        candidates = beam_search(bundle.attention, pair, config.beam,
                                 tokens=token_texts)
        top = rank_candidates(bundle, candidates, provider, config.top_n,
                              mode=config.ranking_mode)
        for cand in top:
            predictions.append(OiePrediction(
                triple=cand.triple,
                confidence=candidate_confidence(cand, config.ranking_mode),
                provenance=Provenance.of(cand),
            ))
    predictions.sort(key=lambda p: (-p.confidence, linearize_triple(p.triple)))
    return predictions


def _bundle_links(bundle: SentenceBundle,
                  dictionary: Optional[PredicateDictionary]) -> list[RelationLink]:
    """Relation links from the bundle's annotations, else freshly linked."""
    annotated = bundle.spans_of_kind(AnnotationKind.RELATION_LINK)
    if annotated:
        return [RelationLink(span=a.span, predicate_id=a.predicate_id,
                             matched_alias=bundle.span_text(a.span))
                for a in annotated]
    if dictionary is None:
        return []
    return link_relation_phrases([t.text for t in bundle.tokens], dictionary)


def _decode_predicates(path: tuple[int, ...],
                       links: list[RelationLink]) -> list[str]:
    """Predicates whose link span contains the whole path, sorted for
    deterministic tie-breaks. Paths straddling several links decode to
    nothing."""
    pids = {
        link.predicate_id
        for link in links
        if all(link.span.contains(t) for t in path)
    }
    return sorted(pids)


def run_relation_classification(
    bundle: SentenceBundle,
    config: TaskConfig,
    provider: Optional[EncoderProvider],
    dictionary: PredicateDictionary,
) -> RcPrediction:
    """Constrained search over the gold pair, then decode predicates back
    into the task category.

    The top-1 prediction is the label of the best decodable candidate;
    the hit set collects every label decoded from the top-n. With no
    decodable candidate the adapter abstains: datasets with a null class
    receive it as the prediction, others score an automatic miss.
    """
    if config.category is None:
        raise ValueError("relation classification requires a category (task map)")
    token_texts = [t.text for t in bundle.tokens]
    links = _bundle_links(bundle, dictionary)
    constraint = SearchConstraint(
        variant=ConstraintVariant.RELATION_LINKED,
        allowed_spans=tuple(sorted({link.span for link in links})),
    )
    (pair,) = enumerate_argument_pairs(bundle, TASK_RC)
    candidates = beam_search(bundle.attention, pair, config.beam, constraint,
                             tokens=token_texts)
    top = rank_candidates(bundle, candidates, provider, config.top_n,
                          mode=config.ranking_mode)

    decoded: list[tuple[str, str, float, Provenance]] = []
    for cand in top:
        for pid in _decode_predicates(cand.token_path, links):
            label = predicate_to_task_relation(pid, config.category, dictionary)
            if label is None:
                continue
            decoded.append((label, pid,
                            candidate_confidence(cand, config.ranking_mode),
                            Provenance.of(cand)))
    if not decoded:
        return RcPrediction(label=config.null_label, labels=(),
                            abstained=True)
    hit_labels = tuple(dict.fromkeys(label for label, *_ in decoded))
    return RcPrediction(label=decoded[0][0], labels=hit_labels,
                        abstained=False, candidates=tuple(decoded))


def run_factual_probe(
    bundle: SentenceBundle,
    config: TaskConfig,
    provider: Optional[EncoderProvider],
    dictionary: Optional[PredicateDictionary] = None,
) -> FpPrediction:
    """Anchor on (gold-head NP, linked relation phrase) and decode the top
    candidate's token path as the tail entity.

    Emission is confined to NPs other than the gold head, which provide
    the candidate tails; a path must stay inside a single candidate NP to
    decode. Without a relation link the probe abstains (scored as a miss
    downstream). The emitted triple carries the link's predicate.
    """
    token_texts = [t.text for t in bundle.tokens]
    head_spans = [a.span for a in bundle.spans_of_kind(AnnotationKind.GOLD_NP)]
    if not head_spans:
        raise ValueError(f"factual probe needs GOLD_NP annotations; sentence "
                         f"{bundle.sentence_id!r} has none")
    links = _bundle_links(bundle, dictionary)
    if not links:
        return FpPrediction(tail=None, predicate_id=None, abstained=True)
    link_by_span: dict[TokenSpan, list[RelationLink]] = {}
    for link in links:
        link_by_span.setdefault(link.span, []).append(link)

    candidate_spans = tuple(
        a.span for a in bundle.spans_of_kind(AnnotationKind.NP)
        if not any(a.span.overlaps(h) for h in head_spans)
    )
    if not candidate_spans:
        return FpPrediction(tail=None, predicate_id=None, abstained=True)
    constraint = SearchConstraint(variant=ConstraintVariant.CANDIDATE_NP,
                                  allowed_spans=candidate_spans)

    pooled: list[TripleCandidate] = []
    for pair in enumerate_argument_pairs(bundle, TASK_FP):
        for cand in beam_search(bundle.attention, pair, config.beam, constraint,
                                tokens=token_texts):
            # A decodable tail lies inside exactly one candidate NP.
            if not any(all(span.contains(t) for t in cand.token_path)
                       for span in candidate_spans):
                continue
            for link in sorted(link_by_span[pair.e_span],
                               key=lambda l: l.predicate_id):
                tail_text = " ".join(token_texts[t] for t in cand.token_path)
                probe_triple = Triple(
                    head=bundle.span_text(pair.s_span),
                    relation=link.predicate_id,
                    tail=tail_text,
                    head_span=pair.s_span,
                    predicate_id=link.predicate_id,
                    relation_path=cand.token_path,
                )
                pooled.append(replace(cand, triple=probe_triple))

    top = rank_candidates(bundle, pooled, provider, config.top_n,
                          mode=config.ranking_mode)
    if not top:
        return FpPrediction(tail=None, predicate_id=None, abstained=True)
    best = top[0]
    return FpPrediction(
        tail=best.triple.tail,
        predicate_id=best.triple.predicate_id,
        abstained=False,
        confidence=candidate_confidence(best, config.ranking_mode),
        provenance=Provenance.of(best),
        triple=best.triple,
    )
