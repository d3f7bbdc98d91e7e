"""Contrastive ranking of candidate triples against their source sentence.

The ranking stage embeds the sentence and each candidate triple
independently and scores the pair by cosine similarity. At training time
the symmetric in-batch cross-entropy objective pushes the N true
(sentence, triple) pairs of a batch above the N^2 - N mismatched ones;
at inference time ordering candidates by cosine similarity is equivalent
to ordering them by their per-pair loss term, since for a fixed sentence
the loss is monotone in the similarity.

Embeddings come from a pluggable provider: precomputed vectors carried in
the bundle, or the trainable bag-of-tokens ``ToyEncoder`` used for
desk-scale verification of the loss and its gradients.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from triplex.bundle import SentenceBundle, Triple
from triplex.search import TripleCandidate


class RankingError(ValueError):
    pass


def linearize_triple(triple: Triple) -> str:
    """Surface form a triple is embedded under: ``head ; relation ; tail``."""
    return f"{triple.head} ; {triple.relation} ; {triple.tail}"


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise RankingError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RankingError(f"{name} contains non-finite entries")
    return arr


def cosine_similarity(u, v) -> float:
    """Standard cosine similarity; symmetric and scale-invariant."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise RankingError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise RankingError("cosine similarity is undefined for the zero vector")
    return float(np.dot(u, v) / (nu * nv))


def _normalize_rows(batch: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(batch, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise RankingError(f"{name} contains a zero vector")
    return batch / norms


def _log_softmax(scores: np.ndarray, axis: int) -> np.ndarray:
    shifted = scores - scores.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def similarity_matrix(sentence_batch, triple_batch) -> np.ndarray:
    """Pairwise cosine similarities S[i][k] = sim(u_i, v_k)."""
    U = np.asarray(sentence_batch, dtype=np.float64)
    V = np.asarray(triple_batch, dtype=np.float64)
    if U.ndim != 2 or V.ndim != 2 or U.shape != V.shape:
        raise RankingError(f"batches must share shape (N, d); got {U.shape} and {V.shape}")
    return _normalize_rows(U, "sentence batch") @ _normalize_rows(V, "triple batch").T


def contrastive_loss(sentence_batch, triple_batch) -> tuple[float, np.ndarray]:
    """Symmetric in-batch cross-entropy over cosine similarities.

    For pair i the sentence-side term is the cross entropy of the softmax
    over sim(u_i, v_k) at k = i, the triple-side term is the transposed
    direction, and the pair's loss is their mean. Returns the batch mean
    and the per-pair terms.
    """
    S = similarity_matrix(sentence_batch, triple_batch)
    n = S.shape[0]
    idx = np.arange(n)
    sentence_terms = -_log_softmax(S, axis=1)[idx, idx]
    triple_terms = -_log_softmax(S, axis=0)[idx, idx]
    per_pair = (sentence_terms + triple_terms) / 2.0
    return float(per_pair.mean()), per_pair


class EncoderProvider(Protocol):
    """Embeds sentences and triple surfaces into one vector space."""

    def embed_sentence(self, text: str) -> np.ndarray: ...

    def embed_triple(self, text: str) -> np.ndarray: ...


class PrecomputedProvider:
    """Serves the vectors carried in a bundle's embedding section."""

    def __init__(self, bundle: SentenceBundle):
        if bundle.sentence_embedding is None:
            raise RankingError(
                f"bundle {bundle.sentence_id!r} carries no embeddings; "
                "export them or use the toy provider"
            )
        self._bundle = bundle

    def embed_sentence(self, text: str) -> np.ndarray:
        return np.asarray(self._bundle.sentence_embedding, dtype=np.float64)

    def embed_triple(self, text: str) -> np.ndarray:
        try:
            return np.asarray(self._bundle.triple_embeddings[text], dtype=np.float64)
        except KeyError:
            raise RankingError(
                f"bundle {self._bundle.sentence_id!r} has no precomputed vector "
                f"for triple surface {text!r}"
            ) from None


def _stable_bucket(token: str, buckets: int) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % buckets


class ToyEncoder:
    """Trainable linear map from hashed bag-of-tokens features.

    With the default identity weights the encoder reduces to plain
    bag-of-tokens cosine, which already separates matching from foreign
    (sentence, triple) pairs by construction. Hashing uses md5, so
    embeddings are stable across processes and platforms.
    """

    def __init__(self, feature_dim: int = 512, dim: Optional[int] = None,
                 weights: Optional[np.ndarray] = None, seed: Optional[int] = None):
        self.feature_dim = feature_dim
        self.dim = feature_dim if dim is None else dim
        if weights is not None:
            weights = np.asarray(weights, dtype=np.float64)
            if weights.shape != (self.feature_dim, self.dim):
                raise RankingError(
                    f"weights must have shape ({self.feature_dim}, {self.dim}), "
                    f"got {weights.shape}"
                )
            self.weights = weights.copy()
        elif self.dim == self.feature_dim and seed is None:
            self.weights = np.eye(self.feature_dim, dtype=np.float64)
        else:
            rng = np.random.default_rng(0 if seed is None else seed)
            self.weights = rng.normal(
                scale=1.0 / math.sqrt(self.feature_dim),
                size=(self.feature_dim, self.dim),
            )

    def features(self, text: str) -> np.ndarray:
        vec = np.zeros(self.feature_dim, dtype=np.float64)
        for token in text.lower().split():
            vec[_stable_bucket(token, self.feature_dim)] += 1.0
        return vec

    def embed(self, text: str) -> np.ndarray:
        return self.weights.T @ self.features(text)

    embed_sentence = embed
    embed_triple = embed

    def loss_and_gradient(self, sentence_features: np.ndarray,
                          triple_features: np.ndarray) -> tuple[float, np.ndarray]:
        """Batch loss and its analytic gradient with respect to the weights.

        Backpropagates the symmetric cross-entropy through the cosine.
        Feature matrices are (N, feature_dim).
        """
        A = np.asarray(sentence_features, dtype=np.float64)
        B = np.asarray(triple_features, dtype=np.float64)
        n = A.shape[0]
        U = A @ self.weights
        V = B @ self.weights
        u_norm = np.linalg.norm(U, axis=1, keepdims=True)
        v_norm = np.linalg.norm(V, axis=1, keepdims=True)
        if np.any(u_norm == 0.0) or np.any(v_norm == 0.0):
            raise RankingError("a batch row embeds to the zero vector")
        Un = U / u_norm
        Vn = V / v_norm
        S = Un @ Vn.T
        idx = np.arange(n)
        row_ls = _log_softmax(S, axis=1)
        col_ls = _log_softmax(S, axis=0)
        loss = float(((-row_ls[idx, idx] - col_ls[idx, idx]) / 2.0).mean())

        eye = np.eye(n)
        grad_S = (np.exp(row_ls) - eye + np.exp(col_ls) - eye) / (2.0 * n)
        grad_Un = grad_S @ Vn
        grad_Vn = grad_S.T @ Un
        # Through the normalization: d cos / d u = (v_hat - cos * u_hat) / |u|.
        grad_U = (grad_Un - (grad_Un * Un).sum(axis=1, keepdims=True) * Un) / u_norm
        grad_V = (grad_Vn - (grad_Vn * Vn).sum(axis=1, keepdims=True) * Vn) / v_norm
        grad_W = A.T @ grad_U + B.T @ grad_V
        return loss, grad_W


@dataclass
class TrainingHistory:
    losses: list[float]

    @property
    def initial(self) -> float:
        return self.losses[0]

    @property
    def final(self) -> float:
        return self.losses[-1]


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float, step_size: float):
        self.step = step
        self.loss = loss
        self.step_size = step_size
        super().__init__(
            f"non-finite loss {loss!r} at step {step} (step size {step_size}); "
            "reduce the step size"
        )


def train_toy_encoder(
    batches: Sequence[tuple[np.ndarray, np.ndarray]],
    epochs: int,
    step_size: float,
    encoder: Optional[ToyEncoder] = None,
) -> tuple[ToyEncoder, TrainingHistory]:
    """Gradient-descend a toy encoder on (sentence, triple) feature batches.

    Each batch is a pair of aligned (N, feature_dim) arrays with N >= 2.
    The loss before any update is recorded first, so zero epochs leave the
    parameters untouched and the history holds the starting loss only.
    """
    if not batches:
        raise RankingError("at least one batch is required")
    for A, B in batches:
        if A.shape != B.shape or A.shape[0] < 2:
            raise RankingError("each batch needs aligned shapes and size >= 2")
    feature_dim = batches[0][0].shape[1]
    if encoder is None:
        encoder = ToyEncoder(feature_dim=feature_dim)

    def mean_loss() -> float:
        return float(np.mean([encoder.loss_and_gradient(A, B)[0]
                              for A, B in batches]))

    losses = [mean_loss()]
    step = 0
    for _ in range(epochs):
        for A, B in batches:
            try:
                loss, grad = encoder.loss_and_gradient(A, B)
            except RankingError as exc:
                # A degenerate state mid-training (e.g. an embedding driven
                # onto the zero vector) is a divergence, not an input error.
                raise TrainingDiverged(step=step, loss=float("nan"),
                                       step_size=step_size) from exc
            if not math.isfinite(loss):
                raise TrainingDiverged(step=step, loss=loss, step_size=step_size)
            encoder.weights = encoder.weights - step_size * grad
            step += 1
        try:
            losses.append(mean_loss())
        except RankingError as exc:
            raise TrainingDiverged(step=step, loss=float("nan"),
                                   step_size=step_size) from exc
    return encoder, TrainingHistory(losses=losses)


RANKED = "ranked"
RAW_SEARCH_SCORE = "raw_search_score"


def rank_candidates(
    bundle: SentenceBundle,
    candidates: Sequence[TripleCandidate],
    provider: Optional[EncoderProvider],
    n: int,
    mode: str = RANKED,
) -> list[TripleCandidate]:
    """Select the top-n candidates.

    In ``ranked`` mode each candidate's rank_score is the cosine between
    the sentence embedding and the triple embedding. In
    ``raw_search_score`` mode candidates are ordered by their original
    search scores and the provider is never consulted (the no-ranking
    ablation must stay pure). Ties break by search score, then surface
    text.
    """
    if n < 1:
        raise RankingError("n must be >= 1")
    if not candidates:
        return []
    if mode == RAW_SEARCH_SCORE:
        ordered = sorted(
            candidates,
            key=lambda c: (-c.search_score, linearize_triple(c.triple)),
        )
        return list(ordered[:n])
    if mode != RANKED:
        raise RankingError(f"unknown ranking mode {mode!r}")
    if provider is None:
        raise RankingError("ranked mode requires an encoder provider")
    sentence_vec = provider.embed_sentence(bundle.text)
    scored = []
    for cand in candidates:
        triple_vec = provider.embed_triple(linearize_triple(cand.triple))
        scored.append(cand.with_rank_score(cosine_similarity(sentence_vec, triple_vec)))
    scored.sort(key=lambda c: (-c.rank_score, -c.search_score,
                               linearize_triple(c.triple)))
    return scored[:n]
