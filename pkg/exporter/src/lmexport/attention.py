"""Attention backends.

A backend turns a model-token sequence into a row-stochastic attention
matrix, aggregated as the mean over attention heads of the model's last
layer. Two backends ship:

* ``seeded``: a small self-attention encoder computed in numpy from
  md5-derived token embeddings and a seeded parameter draw. No weights to
  download, bitwise deterministic, and structurally a transformer layer
  stack, so its attention is genuinely row-stochastic rather than
  synthetic. The default for tests and air-gapped runs.
* ``hf:<model_id>``: any causal/masked LM available to the installed
  ``transformers`` package. Wordpiece rows are averaged and columns
  summed into the exporter's token space, which preserves row sums; rows
  are renormalized after special-token columns are dropped.

Model identifiers: ``seeded``, ``seeded:subword`` (exercises sub-word
alignment), or ``hf:<model_id>``.
"""

from __future__ import annotations

import hashlib
import math
from typing import Protocol

import numpy as np

HEADS = 4
EMBED_DIM = 32
LAYERS = 2


class AttentionBackend(Protocol):
    def attention(self, tokens: list[str]) -> np.ndarray:
        """T x T row-stochastic float32 matrix over the given tokens."""


def _token_vector(text: str, dim: int) -> np.ndarray:
    digest = hashlib.md5(text.lower().encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dim)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class SeededSelfAttentionBackend:
    """Deterministic multi-head self-attention stack in plain numpy."""

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(EMBED_DIM)
        head_dim = EMBED_DIM // HEADS
        self._proj = [
            {
                "q": rng.standard_normal((LAYERS, EMBED_DIM, head_dim)) * scale,
                "k": rng.standard_normal((LAYERS, EMBED_DIM, head_dim)) * scale,
                "v": rng.standard_normal((LAYERS, EMBED_DIM, head_dim)) * scale,
                "o": rng.standard_normal((LAYERS, head_dim, EMBED_DIM)) * scale,
            }
            for _ in range(HEADS)
        ]

    def attention(self, tokens: list[str]) -> np.ndarray:
        size = len(tokens)
        states = np.stack([_token_vector(t, EMBED_DIM) for t in tokens])
        positions = np.arange(size)[:, None] / max(size, 2)
        states = states + np.concatenate(
            [np.sin(positions * (i + 1)) for i in range(EMBED_DIM)], axis=1)

        last_layer_heads = []
        for layer in range(LAYERS):
            mixed = np.zeros_like(states)
            head_attn = []
            for head in self._proj:
                q = states @ head["q"][layer]
                k = states @ head["k"][layer]
                v = states @ head["v"][layer]
                weights = _softmax_rows(q @ k.T / math.sqrt(q.shape[1]))
                head_attn.append(weights)
                mixed += (weights @ v) @ head["o"][layer]
            states = states + mixed
            if layer == LAYERS - 1:
                last_layer_heads = head_attn
        mean_attention = np.mean(last_layer_heads, axis=0)
        return mean_attention.astype(np.float32)


class HFBackend:
    """Last-layer head-mean attention from a transformers model.

    Sub-word rows are averaged and columns summed per word, preserving row
    stochasticity; special-token columns are dropped and rows renormalized.
    """

    def __init__(self, model_id: str):
        import torch  # noqa: F401  (transformers needs it at runtime)
        from transformers import AutoModel, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModel.from_pretrained(model_id,
                                                output_attentions=True)
        self._model.eval()

    def attention_and_pieces(self, words: list[str]):
        import torch

        encoded = self._tokenizer(words, is_split_into_words=True,
                                  return_tensors="pt")
        with torch.no_grad():
            output = self._model(**encoded)
        # Mean over heads of the last layer.
        matrix = output.attentions[-1][0].mean(dim=0).numpy()
        word_ids = encoded.word_ids(0)
        return matrix, word_ids

    def attention(self, tokens: list[str]) -> np.ndarray:
        matrix, word_ids = self.attention_and_pieces(tokens)
        n_words = len(tokens)
        # Sum key columns into words, drop specials, renormalize rows.
        cols = np.zeros((matrix.shape[0], n_words))
        for piece, word in enumerate(word_ids):
            if word is not None:
                cols[:, word] += matrix[:, piece]
        rows = np.zeros((n_words, n_words))
        counts = np.zeros(n_words)
        for piece, word in enumerate(word_ids):
            if word is not None:
                rows[word] += cols[piece]
                counts[word] += 1
        rows /= counts[:, None]
        rows /= rows.sum(axis=1, keepdims=True)
        return rows.astype(np.float32)


def make_attention_backend(model_id: str, seed: int = 0) -> AttentionBackend:
    if model_id in ("seeded", "seeded:subword"):
        return SeededSelfAttentionBackend(seed=seed)
    if model_id.startswith("hf:"):
        return HFBackend(model_id[3:])
    raise ValueError(f"unknown model identifier {model_id!r}; use 'seeded', "
                     "'seeded:subword', or 'hf:<model_id>'")
