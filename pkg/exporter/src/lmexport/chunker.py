"""Noun-phrase identification.

The default chunker prefers spaCy noun chunks when the library and a
model are importable; otherwise a deterministic heuristic stands in:
capitalized-word runs, determiner-led runs, personal pronouns, and bare
numbers (dates and years otherwise missed by noun chunkers). Chunkers
return word-index spans.
"""

from __future__ import annotations

from typing import Protocol

from lmexport.tokenize import Word

_DETERMINERS = {"a", "an", "the", "this", "that", "these", "those"}
_PRONOUNS = {"he", "she", "it", "they", "we", "i", "you"}
# Function words and very common verbs: never NPs on their own, and they
# terminate determiner-led runs.
_STOP_AFTER_DET = {"is", "are", "was", "were", "be", "been", "being", "of",
                   "in", "on", "to", "for", "with", "by", "at", "and", "or",
                   "said", "says", "has", "have", "had", "born", "died",
                   "after", "before", "during", "about", "as", "from"}


class Chunker(Protocol):
    def noun_phrase_spans(self, words: list[Word]) -> list[tuple[int, int]]: ...


class HeuristicChunker:
    """Rule-based NP spans; deterministic and dependency-free."""

    def noun_phrase_spans(self, words: list[Word]) -> list[tuple[int, int]]:
        spans: list[tuple[int, int]] = []
        i = 0
        n = len(words)
        while i < n:
            text = words[i].text
            lowered = text.lower()
            if lowered in _PRONOUNS:
                spans.append((i, i + 1))
                i += 1
            elif text[:1].isupper() and text[:1].isalpha():
                j = i
                while j < n and words[j].text[:1].isupper() and \
                        words[j].text[:1].isalpha():
                    j += 1
                # A lone sentence-initial capital is usually just casing;
                # keep it only when it is not a function word.
                if i > 0 or j - i >= 2 or (lowered not in _DETERMINERS
                                           and lowered not in _STOP_AFTER_DET):
                    spans.append((i, j))
                i = j
            elif lowered in _DETERMINERS:
                j = i + 1
                while j < n and words[j].text.isalpha() and \
                        words[j].text.islower() and \
                        words[j].text.lower() not in _STOP_AFTER_DET:
                    j += 1
                if j > i + 1:
                    spans.append((i, j))
                i = max(j, i + 1)
            elif text.isdigit():
                spans.append((i, i + 1))
                i += 1
            else:
                i += 1
        return spans


class SpacyChunker:
    """spaCy noun chunks; requires an installed pipeline with a parser."""

    def __init__(self, model: str = "en_core_web_sm"):
        import spacy

        self._nlp = spacy.load(model)

    def noun_phrase_spans(self, words: list[Word]) -> list[tuple[int, int]]:
        doc = self._nlp(" ".join(w.text for w in words))
        spans = []
        for chunk in doc.noun_chunks:
            # spaCy tokens align 1:1 with our words for pre-split text.
            spans.append((chunk.start, chunk.end))
        return spans


def default_chunker() -> Chunker:
    try:
        return SpacyChunker()
    except Exception:
        return HeuristicChunker()
