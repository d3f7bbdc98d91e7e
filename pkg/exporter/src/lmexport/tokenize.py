"""Word tokenization with character offsets, plus word -> model-token maps."""

from __future__ import annotations

import re
from dataclasses import dataclass

# Words keep internal apostrophes ("hasn't"); punctuation splits off.
_TOKEN_RE = re.compile(r"\w+(?:['’]\w+)*|[^\w\s]")


@dataclass(frozen=True)
class Word:
    text: str
    start: int
    end: int


def tokenize(sentence: str) -> list[Word]:
    return [Word(text=m.group(0), start=m.start(), end=m.end())
            for m in _TOKEN_RE.finditer(sentence)]


@dataclass(frozen=True)
class ModelToken:
    text: str
    word_index: int  # -1 for tokens with no source word (specials)


def words_to_model_tokens(words: list[Word], subword: bool = False,
                          piece_len: int = 4) -> list[ModelToken]:
    """Map words into the model token space.

    With ``subword`` enabled, words longer than ``piece_len`` split into
    continuation pieces marked with a leading ``##``, mimicking wordpiece
    vocabularies so span alignment is exercised without a real tokenizer.
    """
    tokens: list[ModelToken] = []
    for i, word in enumerate(words):
        if not subword or len(word.text) <= piece_len:
            tokens.append(ModelToken(text=word.text, word_index=i))
            continue
        text = word.text
        tokens.append(ModelToken(text=text[:piece_len], word_index=i))
        for offset in range(piece_len, len(text), piece_len):
            tokens.append(ModelToken(text="##" + text[offset:offset + piece_len],
                                     word_index=i))
    return tokens
