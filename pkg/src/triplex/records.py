"""Line-delimited prediction records exchanged between extract and evaluate.

One JSON object per sentence. Common keys: ``sentence_id``, ``task``,
``text`` (canonical token-joined sentence, the evaluation join key).
Task payloads:

* ``oie``: ``predictions`` is a list of ``{head, relation, tail,
  confidence, provenance}`` objects.
* ``rc``: ``prediction`` (top-1 label or the null label), ``labels`` (the
  top-n hit set), ``abstained``, ``candidates``.
* ``fp``: ``prediction`` (tail string or null), ``predicate_id``,
  ``abstained``, ``confidence``, ``provenance``.

Provenance records the search evidence: the relation token path, position
mode, anchor spans, and both scores. Files are written with a fixed key
order and no timestamps, so identical runs are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from triplex.bundle import SentenceBundle, Triple
from triplex.evaluation import ScoredExtraction
from triplex.tasks import FpPrediction, OiePrediction, Provenance, RcPrediction


def _provenance_dict(p: Provenance) -> dict:
    return {
        "path": list(p.token_path),
        "mode": p.position_mode.value,
        "s_span": [p.s_span.start, p.s_span.end],
        "e_span": [p.e_span.start, p.e_span.end],
        "search_score": p.search_score,
        "rank_score": p.rank_score,
    }


def oie_record(bundle: SentenceBundle, predictions: list[OiePrediction]) -> dict:
    return {
        "sentence_id": bundle.sentence_id,
        "task": "oie",
        "text": bundle.text,
        "predictions": [
            {
                "head": p.triple.head,
                "relation": p.triple.relation,
                "tail": p.triple.tail,
                "confidence": p.confidence,
                "provenance": _provenance_dict(p.provenance),
            }
            for p in predictions
        ],
    }


def rc_record(bundle: SentenceBundle, prediction: RcPrediction) -> dict:
    return {
        "sentence_id": bundle.sentence_id,
        "task": "rc",
        "text": bundle.text,
        "prediction": prediction.label,
        "labels": list(prediction.labels),
        "abstained": prediction.abstained,
        "candidates": [
            {
                "label": label,
                "predicate_id": pid,
                "confidence": confidence,
                "provenance": _provenance_dict(provenance),
            }
            for label, pid, confidence, provenance in prediction.candidates
        ],
    }


def fp_record(bundle: SentenceBundle, prediction: FpPrediction) -> dict:
    record = {
        "sentence_id": bundle.sentence_id,
        "task": "fp",
        "text": bundle.text,
        "prediction": prediction.tail,
        "predicate_id": prediction.predicate_id,
        "abstained": prediction.abstained,
    }
    if prediction.provenance is not None:
        record["confidence"] = prediction.confidence
        record["provenance"] = _provenance_dict(prediction.provenance)
    return record


def write_records(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def read_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from exc
    return records


def oie_extractions(records: list[dict]) -> dict[str, list[ScoredExtraction]]:
    """Group OIE predictions by normalized sentence text for gold matching."""
    grouped: dict[str, list[ScoredExtraction]] = {}
    for record in records:
        key = " ".join(record["text"].lower().split())
        extractions = grouped.setdefault(key, [])
        for p in record.get("predictions", []):
            extractions.append(ScoredExtraction(
                triple=Triple(head=p["head"], relation=p["relation"], tail=p["tail"]),
                confidence=float(p["confidence"]),
            ))
    return grouped


def label_predictions(records: list[dict]) -> dict[str, Optional[str]]:
    """sentence_id -> predicted label/tail (None for abstentions)."""
    return {record["sentence_id"]: record.get("prediction") for record in records}


def hit_set_predictions(records: list[dict]) -> dict[str, list[str]]:
    return {record["sentence_id"]: list(record.get("labels", []))
            for record in records}
