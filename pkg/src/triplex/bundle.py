"""Domain types and the on-disk bundle format shared by every stage.

A sentence bundle is the unit of exchange between an attention exporter
and this engine: tokens with character offsets, span annotations, the
exported attention matrix, and optional precomputed embeddings. Token
indices are the primary coordinate everywhere; character offsets are
retained for display only. Bundles are immutable after load and safe to
share read-only across workers.

Bundle directory layout::

    manifest.json    sentence_id, tokens with offsets, annotations,
                     optional gold triples, optional embedding section
    attention.f32    8-byte header (magic ``DXAT`` + uint32 LE size T),
                     then T*T little-endian float32, row-major
    embeddings.f32   optional; one sentence vector followed by one vector
                     per triple surface named in the manifest

A dataset is a directory of bundle directories plus ``dataset.json``
(task kind, predicate dictionary reference).
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

MANIFEST_FILE = "manifest.json"
ATTENTION_FILE = "attention.f32"
EMBEDDINGS_FILE = "embeddings.f32"
DATASET_FILE = "dataset.json"
ATTENTION_MAGIC = b"DXAT"

# Row-sum slack absorbs reduced-precision export of softmax rows.
ROW_SUM_TOLERANCE = 1e-3
# Exporters cap sequences at 256 tokens; longer manifests load with a warning
# because the cut policy belongs to the exporter, not the engine.
SEQUENCE_LENGTH_WARN = 256


class BundleError(ValueError):
    """A bundle directory violates the format contract.

    Carries the offending sentence id and field name so dataset-scale
    loads can point at the broken file.
    """

    def __init__(self, message: str, sentence_id: str | None = None,
                 field_name: str | None = None):
        self.sentence_id = sentence_id
        self.field_name = field_name
        prefix = ""
        if sentence_id is not None:
            prefix += f"[sentence {sentence_id}] "
        if field_name is not None:
            prefix += f"field '{field_name}': "
        super().__init__(prefix + message)


class AnnotationKind(str, Enum):
    NP = "NP"
    GOLD = "GOLD"
    GOLD_NP = "GOLD_NP"
    RELATION_LINK = "RELATION_LINK"


@dataclass(frozen=True, order=True)
class TokenSpan:
    """Half-open token index interval [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def indices(self) -> range:
        return range(self.start, self.end)

    def contains(self, index: int) -> bool:
        return self.start <= index < self.end

    def contains_span(self, other: "TokenSpan") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: "TokenSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Token:
    """Surface token with display-only character offsets."""

    text: str
    start: int
    end: int


@dataclass(frozen=True)
class SpanAnnotation:
    """A typed span over sentence tokens.

    ``predicate_id`` is present exactly when the kind is RELATION_LINK.
    """

    span: TokenSpan
    kind: AnnotationKind
    predicate_id: Optional[str] = None

    def __post_init__(self):
        if (self.kind is AnnotationKind.RELATION_LINK) != (self.predicate_id is not None):
            raise ValueError(
                "predicate_id is required for RELATION_LINK annotations and "
                f"forbidden otherwise (kind={self.kind.value}, "
                f"predicate_id={self.predicate_id!r})"
            )


@dataclass(frozen=True)
class Triple:
    """A (head; relation; tail) triple with optional token coordinates."""

    head: str
    relation: str
    tail: str
    head_span: Optional[TokenSpan] = None
    tail_span: Optional[TokenSpan] = None
    predicate_id: Optional[str] = None
    relation_path: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not self.head or not self.relation or not self.tail:
            raise ValueError(f"triple elements must be non-empty: {self!r}")

    def surface(self) -> str:
        return f"({self.head}; {self.relation}; {self.tail})"


class AttentionMatrix:
    """Square row-stochastic token-to-token weights.

    Entry ``[q][k]`` is the weight query token q assigns to key token k.
    Stored as float32 so serialization is lossless.
    """

    def __init__(self, weights: np.ndarray):
        weights = np.asarray(weights, dtype=np.float32)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise ValueError(f"attention must be square, got shape {weights.shape}")
        self.weights = weights
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, AttentionMatrix) and np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"AttentionMatrix(size={self.size})"


@dataclass(frozen=True)
class RowSumFinding:
    row: int
    total: float


@dataclass(frozen=True)
class NegativeEntryFinding:
    query: int
    key: int
    value: float


@dataclass(frozen=True)
class AttentionReport:
    """Findings from attention validation. Empty findings mean valid."""

    size: int
    row_sum_findings: tuple[RowSumFinding, ...]
    negative_findings: tuple[NegativeEntryFinding, ...]

    @property
    def ok(self) -> bool:
        return not self.row_sum_findings and not self.negative_findings

    def describe(self) -> list[str]:
        lines = []
        for f in self.row_sum_findings:
            lines.append(f"row {f.row} sums to {f.total:.6f}, expected 1")
        for f in self.negative_findings:
            lines.append(f"entry [{f.query}][{f.key}] = {f.value:.6g} is negative")
        return lines


def validate_attention(matrix: AttentionMatrix,
                       tolerance: float = ROW_SUM_TOLERANCE) -> AttentionReport:
    """Report every row whose sum strays from 1 and every negative entry.

    Validation never aborts; it is pure and idempotent.
    """
    w = matrix.weights.astype(np.float64)
    sums = w.sum(axis=1)
    row_findings = tuple(
        RowSumFinding(row=int(i), total=float(sums[i]))
        for i in np.flatnonzero(np.abs(sums - 1.0) > tolerance)
    )
    neg_q, neg_k = np.nonzero(w < 0)
    negative = tuple(
        NegativeEntryFinding(query=int(q), key=int(k), value=float(w[q, k]))
        for q, k in zip(neg_q, neg_k)
    )
    return AttentionReport(size=matrix.size, row_sum_findings=row_findings,
                           negative_findings=negative)


class SentenceBundle:
    """A tokenized sentence plus everything the engine needs to search it."""

    def __init__(
        self,
        sentence_id: str,
        tokens: list[Token],
        annotations: list[SpanAnnotation],
        attention: AttentionMatrix,
        sentence_embedding: Optional[np.ndarray] = None,
        triple_embeddings: Optional[dict[str, np.ndarray]] = None,
        gold_triples: Optional[list[Triple]] = None,
        truncated: bool = False,
    ):
        if attention.size != len(tokens):
            raise BundleError(
                f"attention size {attention.size} != token count {len(tokens)}",
                sentence_id=sentence_id, field_name="attention",
            )
        for i, ann in enumerate(annotations):
            if ann.span.end > len(tokens):
                raise BundleError(
                    f"span [{ann.span.start}, {ann.span.end}) exceeds "
                    f"token count {len(tokens)}",
                    sentence_id=sentence_id, field_name=f"annotations[{i}]",
                )
        _check_same_kind_overlaps(sentence_id, annotations)
        dims = set()
        if sentence_embedding is not None:
            sentence_embedding = np.asarray(sentence_embedding, dtype=np.float32)
            dims.add(sentence_embedding.shape[0])
        triple_embeddings = {
            k: np.asarray(v, dtype=np.float32)
            for k, v in (triple_embeddings or {}).items()
        }
        dims.update(v.shape[0] for v in triple_embeddings.values())
        if len(dims) > 1:
            raise BundleError(f"inconsistent embedding dimensions {sorted(dims)}",
                              sentence_id=sentence_id, field_name="embedding")
        if len(tokens) > SEQUENCE_LENGTH_WARN:
            warnings.warn(
                f"sentence {sentence_id!r} has {len(tokens)} tokens, beyond the "
                f"usual exporter cap of {SEQUENCE_LENGTH_WARN}; the engine loads "
                "it as-is", stacklevel=2,
            )
        self.sentence_id = sentence_id
        self.tokens = list(tokens)
        self.annotations = list(annotations)
        self.attention = attention
        self.sentence_embedding = sentence_embedding
        self.triple_embeddings = triple_embeddings
        self.gold_triples = list(gold_triples) if gold_triples is not None else None
        self.truncated = truncated

    @property
    def text(self) -> str:
        """Canonical sentence text: token surfaces joined by single spaces."""
        return " ".join(t.text for t in self.tokens)

    def span_text(self, span: TokenSpan) -> str:
        return " ".join(self.tokens[i].text for i in span.indices())

    def spans_of_kind(self, kind: AnnotationKind) -> list[SpanAnnotation]:
        return [a for a in self.annotations if a.kind is kind]

    @property
    def embedding_dim(self) -> Optional[int]:
        if self.sentence_embedding is not None:
            return int(self.sentence_embedding.shape[0])
        for v in self.triple_embeddings.values():
            return int(v.shape[0])
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SentenceBundle):
            return NotImplemented
        if (self.sentence_id, self.tokens, self.annotations, self.truncated) != (
                other.sentence_id, other.tokens, other.annotations, other.truncated):
            return False
        if self.attention != other.attention:
            return False
        if (self.sentence_embedding is None) != (other.sentence_embedding is None):
            return False
        if self.sentence_embedding is not None and not np.array_equal(
                self.sentence_embedding, other.sentence_embedding):
            return False
        if list(self.triple_embeddings) != list(other.triple_embeddings):
            return False
        for key, vec in self.triple_embeddings.items():
            if not np.array_equal(vec, other.triple_embeddings[key]):
                return False
        return self.gold_triples == other.gold_triples

    def __repr__(self) -> str:
        return (f"SentenceBundle(id={self.sentence_id!r}, tokens={len(self.tokens)}, "
                f"annotations={len(self.annotations)})")


def _check_same_kind_overlaps(sentence_id: str, annotations: list[SpanAnnotation]):
    # Same-kind spans must not overlap; RELATION_LINK spans may coincide
    # exactly (one link per predicate for an ambiguous alias) but not
    # partially overlap.
    by_kind: dict[AnnotationKind, list[SpanAnnotation]] = {}
    for ann in annotations:
        by_kind.setdefault(ann.kind, []).append(ann)
    for kind, group in by_kind.items():
        ordered = sorted(group, key=lambda a: (a.span.start, a.span.end))
        for a, b in zip(ordered, ordered[1:]):
            if a.span.overlaps(b.span):
                if kind is AnnotationKind.RELATION_LINK and a.span == b.span:
                    continue
                raise BundleError(
                    f"{kind.value} spans overlap: [{a.span.start},{a.span.end}) "
                    f"and [{b.span.start},{b.span.end})",
                    sentence_id=sentence_id, field_name="annotations",
                )


# ---------------------------------------------------------------------------
# Serialization


def _manifest_dict(bundle: SentenceBundle) -> dict:
    manifest: dict = {
        "sentence_id": bundle.sentence_id,
        "tokens": [{"text": t.text, "start": t.start, "end": t.end}
                   for t in bundle.tokens],
        "annotations": [],
    }
    for ann in bundle.annotations:
        entry = {"kind": ann.kind.value, "start": ann.span.start, "end": ann.span.end}
        if ann.predicate_id is not None:
            entry["predicate_id"] = ann.predicate_id
        manifest["annotations"].append(entry)
    if bundle.gold_triples is not None:
        manifest["gold_triples"] = [
            {"head": t.head, "relation": t.relation, "tail": t.tail}
            for t in bundle.gold_triples
        ]
    if bundle.sentence_embedding is not None:
        manifest["embedding"] = {
            "dim": int(bundle.sentence_embedding.shape[0]),
            "triples": list(bundle.triple_embeddings),
        }
    if bundle.truncated:
        manifest["truncated"] = True
    return manifest


def save_bundle(bundle: SentenceBundle, path: str | Path) -> Path:
    """Write a bundle directory; loading it back reproduces the bundle exactly."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(_manifest_dict(bundle), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    with open(path / ATTENTION_FILE, "wb") as fh:
        fh.write(ATTENTION_MAGIC)
        fh.write(struct.pack("<I", bundle.attention.size))
        fh.write(np.ascontiguousarray(bundle.attention.weights, dtype="<f4").tobytes())
    if bundle.sentence_embedding is not None:
        vectors = [bundle.sentence_embedding]
        vectors.extend(bundle.triple_embeddings.values())
        with open(path / EMBEDDINGS_FILE, "wb") as fh:
            fh.write(np.ascontiguousarray(np.stack(vectors), dtype="<f4").tobytes())
    return path


def _load_attention(path: Path, sentence_id: str) -> AttentionMatrix:
    raw = path.read_bytes()
    if len(raw) < 8 or raw[:4] != ATTENTION_MAGIC:
        raise BundleError("bad attention header (magic mismatch)",
                          sentence_id=sentence_id, field_name="attention")
    (size,) = struct.unpack("<I", raw[4:8])
    expected = 8 + size * size * 4
    if len(raw) != expected:
        raise BundleError(
            f"attention payload is {len(raw) - 8} bytes, expected "
            f"{size}x{size} float32 ({expected - 8})",
            sentence_id=sentence_id, field_name="attention",
        )
    weights = np.frombuffer(raw[8:], dtype="<f4").reshape(size, size)
    return AttentionMatrix(weights)


def load_bundle(path: str | Path, check_attention: bool = True,
                row_sum_tolerance: float = ROW_SUM_TOLERANCE) -> SentenceBundle:
    """Load and fully validate one bundle directory.

    Violations of annotation or matrix invariants are rejected here, never
    later. Set ``check_attention=False`` to admit non-stochastic matrices
    (validation findings can still be obtained via :func:`validate_attention`).
    """
    path = Path(path)
    manifest_path = path / MANIFEST_FILE
    if not manifest_path.is_file():
        raise BundleError(f"no {MANIFEST_FILE} in {path}", field_name="manifest")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(f"malformed manifest: {exc}", field_name="manifest") from exc

    sentence_id = manifest.get("sentence_id")
    if not isinstance(sentence_id, str) or not sentence_id:
        raise BundleError("manifest is missing a sentence_id", field_name="sentence_id")

    try:
        tokens = [Token(text=t["text"], start=int(t["start"]), end=int(t["end"]))
                  for t in manifest["tokens"]]
    except (KeyError, TypeError) as exc:
        raise BundleError(f"malformed token list: {exc!r}",
                          sentence_id=sentence_id, field_name="tokens") from exc

    annotations = []
    for i, entry in enumerate(manifest.get("annotations", [])):
        try:
            kind = AnnotationKind(entry["kind"])
            span = TokenSpan(int(entry["start"]), int(entry["end"]))
            annotations.append(SpanAnnotation(span=span, kind=kind,
                                              predicate_id=entry.get("predicate_id")))
        except (KeyError, ValueError, TypeError) as exc:
            raise BundleError(f"malformed annotation: {exc}",
                              sentence_id=sentence_id,
                              field_name=f"annotations[{i}]") from exc

    gold = None
    if "gold_triples" in manifest:
        gold = []
        for i, entry in enumerate(manifest["gold_triples"]):
            try:
                gold.append(Triple(head=entry["head"], relation=entry["relation"],
                                   tail=entry["tail"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise BundleError(f"malformed gold triple: {exc}",
                                  sentence_id=sentence_id,
                                  field_name=f"gold_triples[{i}]") from exc

    attention = _load_attention(path / ATTENTION_FILE, sentence_id)

    sentence_embedding = None
    triple_embeddings: dict[str, np.ndarray] = {}
    if "embedding" in manifest:
        spec = manifest["embedding"]
        try:
            dim = int(spec["dim"])
            names = list(spec["triples"])
        except (KeyError, TypeError) as exc:
            raise BundleError(f"malformed embedding section: {exc!r}",
                              sentence_id=sentence_id, field_name="embedding") from exc
        emb_path = path / EMBEDDINGS_FILE
        if not emb_path.is_file():
            raise BundleError(f"manifest declares embeddings but {EMBEDDINGS_FILE} "
                              "is missing", sentence_id=sentence_id,
                              field_name="embedding")
        flat = np.frombuffer(emb_path.read_bytes(), dtype="<f4")
        expected = (1 + len(names)) * dim
        if flat.size != expected:
            raise BundleError(
                f"embedding file holds {flat.size} floats, expected {expected}",
                sentence_id=sentence_id, field_name="embedding",
            )
        vectors = flat.reshape(1 + len(names), dim)
        sentence_embedding = vectors[0]
        triple_embeddings = {name: vectors[1 + i] for i, name in enumerate(names)}

    bundle = SentenceBundle(
        sentence_id=sentence_id,
        tokens=tokens,
        annotations=annotations,
        attention=attention,
        sentence_embedding=sentence_embedding,
        triple_embeddings=triple_embeddings,
        gold_triples=gold,
        truncated=bool(manifest.get("truncated", False)),
    )
    if check_attention:
        report = validate_attention(bundle.attention, tolerance=row_sum_tolerance)
        if not report.ok:
            raise BundleError(
                "attention matrix failed validation: " + "; ".join(report.describe()),
                sentence_id=sentence_id, field_name="attention",
            )
    return bundle


# ---------------------------------------------------------------------------
# Datasets


@dataclass
class DatasetInfo:
    """Parsed ``dataset.json`` plus the bundle directories it governs."""

    root: Path
    task: str
    predicate_dictionary: Optional[Path] = None
    category: Optional[str] = None
    null_label: Optional[str] = None
    bundle_dirs: list[Path] = field(default_factory=list)


def load_dataset_info(root: str | Path) -> DatasetInfo:
    """Read dataset.json and enumerate bundle directories, sorted by name."""
    root = Path(root)
    meta_path = root / DATASET_FILE
    if not meta_path.is_file():
        raise BundleError(f"no {DATASET_FILE} in {root}", field_name="dataset")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(f"malformed dataset.json: {exc}", field_name="dataset") from exc
    task = meta.get("task")
    if task not in ("oie", "rc", "fp"):
        raise BundleError(f"dataset.json task must be one of oie/rc/fp, got {task!r}",
                          field_name="dataset")
    dict_ref = meta.get("predicate_dictionary")
    bundle_dirs = sorted(
        p for p in root.iterdir() if p.is_dir() and (p / MANIFEST_FILE).is_file()
    )
    return DatasetInfo(
        root=root,
        task=task,
        predicate_dictionary=(root / dict_ref).resolve() if dict_ref else None,
        category=meta.get("category"),
        null_label=meta.get("null_label"),
        bundle_dirs=bundle_dirs,
    )


def iter_dataset_bundles(info: DatasetInfo, **load_kwargs) -> Iterator[SentenceBundle]:
    for bundle_dir in info.bundle_dirs:
        yield load_bundle(bundle_dir, **load_kwargs)
