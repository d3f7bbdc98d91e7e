"""Zero-shot triple extraction over pretrained-LM attention matrices.

The engine translates a sentence into relational triples in two stages:
a generating stage that beam-searches token paths over the sentence's
attention matrix between anchor spans, and a ranking stage that scores
(sentence, triple) pairs by embedding cosine similarity. Task adapters
wire the two stages into open information extraction, relation
classification, and factual probing.
"""

__version__ = "0.1.0"

from triplex.bundle import (
    AnnotationKind,
    AttentionMatrix,
    BundleError,
    SentenceBundle,
    SpanAnnotation,
    Token,
    TokenSpan,
    Triple,
    load_bundle,
    save_bundle,
    validate_attention,
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
    sequence_score,
)
from triplex.ranking import (
    ToyEncoder,
    contrastive_loss,
    cosine_similarity,
    rank_candidates,
    train_toy_encoder,
)

__all__ = [
    "AnnotationKind",
    "ArgumentPair",
    "AttentionMatrix",
    "BeamParams",
    "BundleError",
    "ConstraintVariant",
    "PositionMode",
    "SearchConstraint",
    "SentenceBundle",
    "SpanAnnotation",
    "Token",
    "TokenSpan",
    "Triple",
    "TripleCandidate",
    "ToyEncoder",
    "beam_search",
    "contrastive_loss",
    "cosine_similarity",
    "enumerate_argument_pairs",
    "load_bundle",
    "rank_candidates",
    "save_bundle",
    "sequence_score",
    "train_toy_encoder",
    "validate_attention",
]
