"""Embedding backends for sentence and triple vectors.

The deterministic backend hashes character trigrams through a seeded
projection and L2-normalizes, giving stable vectors with self-cosine 1.
The transformers backend feeds the pair serialization
``[CLS] sentence [SEP] triple [SEP]`` and mean-pools each segment's
non-special tokens (the pooling rule is recorded in the manifest by the
caller). Both embed sentences and triples into the same space.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

NGRAM = 3
FEATURES = 2048


class EmbeddingBackend(Protocol):
    dim: int

    def embed_sentence(self, text: str) -> np.ndarray: ...

    def embed_triple(self, text: str) -> np.ndarray: ...


def _ngram_counts(text: str, buckets: int) -> np.ndarray:
    padded = f"  {text.lower()}  "
    counts = np.zeros(buckets)
    for i in range(len(padded) - NGRAM + 1):
        gram = padded[i:i + NGRAM]
        digest = hashlib.md5(gram.encode("utf-8")).digest()
        counts[int.from_bytes(digest[:8], "little") % buckets] += 1.0
    return counts


class HashedNgramBackend:
    """Seeded random projection over hashed character trigrams."""

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((FEATURES, dim)) / np.sqrt(FEATURES)

    def _embed(self, text: str) -> np.ndarray:
        vec = self._projection.T @ _ngram_counts(text, FEATURES)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec = np.zeros(self.dim)
            vec[0] = 1.0
            return vec.astype(np.float32)
        return (vec / norm).astype(np.float32)

    embed_sentence = _embed
    embed_triple = _embed


class HFPairBackend:
    """Mean-pooled segment embeddings from a transformers encoder."""

    def __init__(self, model_id: str):
        import torch  # noqa: F401
        from transformers import AutoModel, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModel.from_pretrained(model_id)
        self._model.eval()
        self.dim = int(self._model.config.hidden_size)

    def _segment_vector(self, sentence: str, triple: str | None,
                        want_second: bool) -> np.ndarray:
        import torch

        encoded = self._tokenizer(sentence, triple, return_tensors="pt")
        with torch.no_grad():
            hidden = self._model(**encoded).last_hidden_state[0]
        type_ids = encoded.get("token_type_ids")
        special = self._tokenizer.get_special_tokens_mask(
            encoded["input_ids"][0].tolist(), already_has_special_tokens=True)
        wanted = []
        for i, is_special in enumerate(special):
            if is_special:
                continue
            segment = int(type_ids[0][i]) if type_ids is not None else 0
            if segment == (1 if want_second else 0):
                wanted.append(i)
        return hidden[wanted].mean(dim=0).numpy().astype(np.float32)

    def embed_sentence(self, text: str) -> np.ndarray:
        return self._segment_vector(text, None, want_second=False)

    def embed_triple(self, text: str) -> np.ndarray:
        # The triple rides in the second segment of the pair serialization.
        return self._segment_vector("", text, want_second=True)

    def embed_pair(self, sentence: str, triple: str) -> tuple[np.ndarray, np.ndarray]:
        return (self._segment_vector(sentence, triple, want_second=False),
                self._segment_vector(sentence, triple, want_second=True))


def make_embedding_backend(model_id: str, seed: int = 0) -> EmbeddingBackend:
    if model_id.startswith("seeded"):
        return HashedNgramBackend(seed=seed)
    if model_id.startswith("hf:"):
        return HFPairBackend(model_id[3:])
    raise ValueError(f"unknown embedding model {model_id!r}")
