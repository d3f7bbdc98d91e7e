"""Bundle export: annotate, align, run the model, write the wire format.

The engine's bundle format is reimplemented here from its documented
layout (manifest.json plus a DXAT-headed float32 matrix) so the two
programs stay coupled only through the files.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from lmexport.attention import make_attention_backend
from lmexport.chunker import Chunker, default_chunker
from lmexport.embed import EmbeddingBackend, make_embedding_backend
from lmexport.tokenize import ModelToken, Word, tokenize, words_to_model_tokens

log = logging.getLogger("lmexport")

ATTENTION_MAGIC = b"DXAT"


@dataclass
class ExportSpec:
    """Knobs for one export run."""

    model: str = "seeded"
    embed_model: str = "seeded"
    max_length: int = 256
    seed: int = 0
    embed_triples: bool = False
    chunker: Optional[Chunker] = None

    def subword(self) -> bool:
        return self.model == "seeded:subword"


@dataclass(frozen=True)
class WordAnnotation:
    """Annotation in word space, pre-alignment."""

    start: int
    end: int
    kind: str
    predicate_id: Optional[str] = None


@dataclass
class SentenceRecord:
    """One corpus sentence with its task annotations and optional gold."""

    sentence_id: str
    text: str
    annotations: list[WordAnnotation] = field(default_factory=list)
    gold_triples: list[tuple[str, str, str]] = field(default_factory=list)
    auto_np: bool = True


def align_span(start: int, end: int,
               model_tokens: list[ModelToken]) -> Optional[tuple[int, int]]:
    """Minimal model-token span covering every sub-word of [start, end)."""
    indices = [i for i, tok in enumerate(model_tokens)
               if start <= tok.word_index < end]
    if not indices:
        return None
    lo, hi = min(indices), max(indices) + 1
    covered = {model_tokens[i].word_index for i in range(lo, hi)}
    if covered != set(range(start, end)):
        return None
    return lo, hi


def _find_word_span(words: list[Word], phrase: str) -> Optional[tuple[int, int]]:
    needle = phrase.lower().split()
    lowered = [w.text.lower() for w in words]
    for start in range(len(lowered) - len(needle) + 1):
        if lowered[start:start + len(needle)] == needle:
            return start, start + len(needle)
    return None


def locate_annotation(words: list[Word], phrase: str, kind: str,
                      predicate_id: Optional[str] = None) -> Optional[WordAnnotation]:
    span = _find_word_span(words, phrase)
    if span is None:
        return None
    return WordAnnotation(start=span[0], end=span[1], kind=kind,
                          predicate_id=predicate_id)


def _dedupe_spans(annotations: list[WordAnnotation]) -> list[WordAnnotation]:
    # Same-kind spans must not overlap in the engine; keep the earliest,
    # longest span of each overlapping same-kind cluster.
    kept: list[WordAnnotation] = []
    for ann in sorted(annotations, key=lambda a: (a.kind, a.start,
                                                  -(a.end - a.start))):
        clash = any(k.kind == ann.kind and not (ann.end <= k.start
                                                or k.end <= ann.start)
                    and not (k.start == ann.start and k.end == ann.end
                             and k.kind == "RELATION_LINK"
                             and k.predicate_id != ann.predicate_id)
                    for k in kept)
        if not clash:
            kept.append(ann)
    kept.sort(key=lambda a: (a.start, a.end, a.kind, a.predicate_id or ""))
    return kept


def export_bundle(record: SentenceRecord, spec: ExportSpec,
                  out_dir: Path) -> Path:
    """Export one sentence to a bundle directory (write-then-rename)."""
    words = tokenize(record.text)
    if not words:
        raise ValueError(f"sentence {record.sentence_id!r} has no tokens")

    annotations = list(record.annotations)
    if record.auto_np:
        chunker = spec.chunker or default_chunker()
        claimed = [(a.start, a.end) for a in annotations if a.kind == "NP"]
        for start, end in chunker.noun_phrase_spans(words):
            if not any(s < end and start < e for s, e in claimed):
                annotations.append(WordAnnotation(start=start, end=end, kind="NP"))

    model_tokens = words_to_model_tokens(words, subword=spec.subword())
    truncated = False
    if len(model_tokens) > spec.max_length:
        model_tokens = model_tokens[:spec.max_length]
        truncated = True
        log.warning("sentence %s truncated to %d model tokens",
                    record.sentence_id, spec.max_length)

    aligned = []
    for ann in _dedupe_spans(annotations):
        span = align_span(ann.start, ann.end, model_tokens)
        if span is None:
            # Dropped, never silently shifted.
            log.warning("sentence %s: annotation %s [%d, %d) does not align "
                        "to model tokens; dropped", record.sentence_id,
                        ann.kind, ann.start, ann.end)
            continue
        entry = {"kind": ann.kind, "start": span[0], "end": span[1]}
        if ann.predicate_id is not None:
            entry["predicate_id"] = ann.predicate_id
        aligned.append(entry)

    backend = make_attention_backend(spec.model, seed=spec.seed)
    matrix = backend.attention([t.text for t in model_tokens])
    size = len(model_tokens)
    if matrix.shape != (size, size):
        raise ValueError(f"backend returned {matrix.shape}, expected "
                         f"({size}, {size})")

    token_entries = []
    for tok in model_tokens:
        if tok.word_index >= 0:
            word = words[tok.word_index]
            token_entries.append({"text": tok.text, "start": word.start,
                                  "end": word.end})
        else:
            token_entries.append({"text": tok.text, "start": 0, "end": 0})

    manifest: dict = {
        "sentence_id": record.sentence_id,
        "tokens": token_entries,
        "annotations": aligned,
    }
    if record.gold_triples:
        manifest["gold_triples"] = [
            {"head": h, "relation": r, "tail": t}
            for h, r, t in record.gold_triples
        ]
    if truncated:
        manifest["truncated"] = True

    embeddings: Optional[np.ndarray] = None
    if spec.embed_triples:
        emb_backend = make_embedding_backend(spec.embed_model, seed=spec.seed)
        names = [f"{h} ; {r} ; {t}" for h, r, t in record.gold_triples]
        vectors = [emb_backend.embed_sentence(record.text)]
        vectors.extend(emb_backend.embed_triple(name) for name in names)
        manifest["embedding"] = {"dim": int(vectors[0].shape[0]),
                                 "triples": names,
                                 "pooling": "mean-over-segment"}
        embeddings = np.stack(vectors)

    final_dir = out_dir / record.sentence_id
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{record.sentence_id}-",
                                    dir=out_dir))
    try:
        with open(staging / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        with open(staging / "attention.f32", "wb") as fh:
            fh.write(ATTENTION_MAGIC)
            fh.write(struct.pack("<I", size))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
        if embeddings is not None:
            with open(staging / "embeddings.f32", "wb") as fh:
                fh.write(np.ascontiguousarray(embeddings, dtype="<f4").tobytes())
        if final_dir.exists():
            for leftover in final_dir.iterdir():
                leftover.unlink()
            final_dir.rmdir()
        os.replace(staging, final_dir)
    finally:
        if staging.exists():
            for leftover in staging.iterdir():
                leftover.unlink()
            staging.rmdir()
    return final_dir


def export_dataset(records: list[SentenceRecord], spec: ExportSpec,
                   out_dir: Path, task: str,
                   dataset_meta: Optional[dict] = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"task": task}
    meta.update(dataset_meta or {})
    with open(out_dir / "dataset.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, ensure_ascii=False)
        fh.write("\n")
    for record in records:
        export_bundle(record, spec, out_dir)
    return out_dir
