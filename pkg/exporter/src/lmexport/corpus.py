"""Corpus readers: plain text, the open-extraction gold TSV, and JSONL
sample files for relation classification and factual probing.

Formats:

* plain text: one sentence per line; ids are ``s<line>``.
* oie TSV: ``sentence<TAB>head<TAB>relation<TAB>tail``; repeated
  sentences group into one record carrying all their gold triples.
* rc JSONL: ``{"id", "sentence", "head", "tail", "label"?, "links":
  [{"phrase", "predicate"}]...}``; head and tail become GOLD spans
  (head listed first), links become RELATION_LINK spans.
* fp JSONL: ``{"id", "sentence", "head", "gold_tail"?, "links": [...]}``;
  noun phrases overlapping the head mention become GOLD_NP spans.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from lmexport.chunker import Chunker, default_chunker
from lmexport.export import SentenceRecord, WordAnnotation, locate_annotation
from lmexport.tokenize import tokenize

log = logging.getLogger("lmexport")


def read_plain(path: Path) -> list[SentenceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line:
                records.append(SentenceRecord(sentence_id=f"s{lineno:05d}",
                                              text=line))
    return records


def read_oie_tsv(path: Path) -> list[SentenceRecord]:
    by_sentence: dict[str, SentenceRecord] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 4:
                raise ValueError(f"{path}:{lineno}: expected sentence, head, "
                                 "relation, tail")
            sentence, head, relation, tail = parts[:4]
            if sentence not in by_sentence:
                by_sentence[sentence] = SentenceRecord(
                    sentence_id=f"s{len(order) + 1:05d}", text=sentence)
                order.append(sentence)
            by_sentence[sentence].gold_triples.append((head, relation, tail))
    return [by_sentence[s] for s in order]


def _link_annotations(words, links) -> list[WordAnnotation]:
    annotations = []
    for link in links or []:
        ann = locate_annotation(words, link["phrase"], "RELATION_LINK",
                                predicate_id=link["predicate"])
        if ann is None:
            log.warning("link phrase %r not found; skipped", link["phrase"])
        else:
            annotations.append(ann)
    return annotations


def read_rc_jsonl(path: Path) -> list[SentenceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            sample = json.loads(line)
            words = tokenize(sample["sentence"])
            annotations = []
            for role in ("head", "tail"):
                ann = locate_annotation(words, sample[role], "GOLD")
                if ann is None:
                    raise ValueError(f"{path}:{lineno}: {role} "
                                     f"{sample[role]!r} not found in sentence")
                annotations.append(ann)
            annotations.extend(_link_annotations(words, sample.get("links")))
            records.append(SentenceRecord(
                sentence_id=sample["id"],
                text=sample["sentence"],
                annotations=annotations,
                auto_np=False,
            ))
    return records


def read_fp_jsonl(path: Path, chunker: Chunker | None = None) -> list[SentenceRecord]:
    chunker = chunker or default_chunker()
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            sample = json.loads(line)
            words = tokenize(sample["sentence"])
            head = locate_annotation(words, sample["head"], "GOLD_NP")
            if head is None:
                raise ValueError(f"{path}:{lineno}: head {sample['head']!r} "
                                 "not found in sentence")
            annotations = [head]
            # NPs overlapping the head mention are head candidates, the
            # rest provide candidate tails.
            for start, end in chunker.noun_phrase_spans(words):
                if start < head.end and head.start < end:
                    if (start, end) != (head.start, head.end):
                        annotations.append(WordAnnotation(
                            start=start, end=end, kind="GOLD_NP"))
                else:
                    annotations.append(WordAnnotation(start=start, end=end,
                                                      kind="NP"))
            annotations.extend(_link_annotations(words, sample.get("links")))
            records.append(SentenceRecord(
                sentence_id=sample["id"],
                text=sample["sentence"],
                annotations=annotations,
                auto_np=False,
            ))
    return records


READERS = {
    "plain": read_plain,
    "oie": read_oie_tsv,
    "rc": read_rc_jsonl,
    "fp": read_fp_jsonl,
}
