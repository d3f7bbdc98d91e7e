"""Deterministic synthetic fixtures bundled with the repository.

Each fixture hand-places attention mass so the desired relation paths are
the only feasible search candidates: every off-path transition carries
exactly zero weight and the diagonal absorbs the remaining row mass,
which the search never visits. Rebuilding the tree is byte-stable, so the
committed fixtures double as a regression check on the bundle format.

Build or refresh with ``python -m triplex.fixtures <out_root>``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from triplex.bundle import (
    AnnotationKind,
    AttentionMatrix,
    SentenceBundle,
    SpanAnnotation,
    Token,
    TokenSpan,
    Triple,
    save_bundle,
)

OIE_DATASET = "oie_running_example"
RC_DATASET = "rc_tacred_sample"
FP_DATASET = "fp_google_re_sample"
DICT_DIR = "dicts"
GOLD_DIR = "gold"


def tokens_from_text(text: str) -> list[Token]:
    tokens = []
    cursor = 0
    for part in text.split():
        start = text.index(part, cursor)
        tokens.append(Token(text=part, start=start, end=start + len(part)))
        cursor = start + len(part)
    return tokens


def build_attention(size: int, mass: dict[tuple[int, int], float]) -> AttentionMatrix:
    """Row-stochastic matrix with the given off-diagonal mass; the diagonal
    absorbs each row's remainder so unrelated transitions stay exactly zero."""
    weights = np.zeros((size, size), dtype=np.float64)
    for (query, key), value in mass.items():
        if query == key:
            raise ValueError("diagonal mass is implied, not assigned")
        weights[query, key] = value
    for row in range(size):
        remainder = 1.0 - weights[row].sum()
        if remainder < 0:
            raise ValueError(f"row {row} mass exceeds 1")
        weights[row, row] = remainder
    return AttentionMatrix(weights.astype(np.float32))


def oie_running_example_bundle() -> SentenceBundle:
    """The inverted-sentence example: one relation left of both anchors,
    one between them."""
    text = "Born in Glasgow , Fisher is a graduate of the London Opera Centre ."
    tokens = tokens_from_text(text)
    annotations = [
        SpanAnnotation(span=TokenSpan(2, 3), kind=AnnotationKind.NP),
        SpanAnnotation(span=TokenSpan(4, 5), kind=AnnotationKind.NP),
        SpanAnnotation(span=TokenSpan(10, 13), kind=AnnotationKind.NP),
    ]
    # Path "Born in" (left of both anchors): Fisher -> Born -> in -> Glasgow.
    # Path "is a graduate of" (between): Fisher -> is -> ... -> of -> London.
    attention = build_attention(len(tokens), {
        (0, 4): 0.9,
        (1, 0): 0.9,
        (2, 1): 0.9,
        (5, 4): 0.6,
        (6, 5): 0.6,
        (7, 6): 0.6,
        (8, 7): 0.6,
        (10, 8): 0.6,
    })
    gold = [
        Triple(head="Fisher", relation="Born in", tail="Glasgow"),
        Triple(head="Fisher", relation="is a graduate of", tail="London Opera Centre"),
    ]
    # Precomputed vectors order the between-pair triple first, matching the
    # toy provider's bag-of-tokens ordering.
    sentence_vec = np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32)
    triple_vecs = {
        "Fisher ; Born in ; Glasgow":
            np.array([0.5, 0.8660254, 0.0, 0.0], dtype=np.float32),
        "Fisher ; is a graduate of ; London Opera Centre":
            np.array([0.9, 0.4358899, 0.0, 0.0], dtype=np.float32),
    }
    return SentenceBundle(
        sentence_id="oie-0001",
        tokens=tokens,
        annotations=annotations,
        attention=attention,
        sentence_embedding=sentence_vec,
        triple_embeddings=triple_vecs,
        gold_triples=gold,
    )


def rc_sample_bundle() -> SentenceBundle:
    """Gold pair with the relation phrase right of both entities."""
    text = "Denise Maloney Pictou , one of Aquash 's daughters , says ."
    tokens = tokens_from_text(text)
    annotations = [
        # Manifest order carries roles: first GOLD is the head entity.
        SpanAnnotation(span=TokenSpan(0, 3), kind=AnnotationKind.GOLD),
        SpanAnnotation(span=TokenSpan(6, 7), kind=AnnotationKind.GOLD),
        SpanAnnotation(span=TokenSpan(8, 9), kind=AnnotationKind.RELATION_LINK,
                       predicate_id="child"),
    ]
    attention = build_attention(len(tokens), {
        (8, 2): 0.8,  # Pictou -> daughters
        (6, 8): 0.8,  # daughters -> Aquash (terminal)
    })
    gold = [Triple(head="Denise Maloney Pictou", relation="child", tail="Aquash")]
    return SentenceBundle(
        sentence_id="rc-tacred-0001",
        tokens=tokens,
        annotations=annotations,
        attention=attention,
        gold_triples=gold,
    )


def fp_sample_bundles() -> list[SentenceBundle]:
    """Two probe facts: one decodable date, one with no linkable relation."""
    text = "Peter F Martin ( born 1941 ) is an American politician ."
    tokens = tokens_from_text(text)
    annotations = [
        SpanAnnotation(span=TokenSpan(0, 3), kind=AnnotationKind.GOLD_NP),
        SpanAnnotation(span=TokenSpan(5, 6), kind=AnnotationKind.NP),
        SpanAnnotation(span=TokenSpan(9, 11), kind=AnnotationKind.NP),
        SpanAnnotation(span=TokenSpan(4, 5), kind=AnnotationKind.RELATION_LINK,
                       predicate_id="date_of_birth"),
    ]
    attention = build_attention(len(tokens), {
        (5, 2): 0.8,  # Martin -> 1941
        (4, 5): 0.8,  # 1941 -> born (terminal into the link span)
    })
    first = SentenceBundle(
        sentence_id="fp-google-re-0001",
        tokens=tokens,
        annotations=annotations,
        attention=attention,
        gold_triples=[Triple(head="Peter F Martin", relation="date_of_birth",
                             tail="1941")],
    )

    # The birth date is expressed as "( c. 1902" with no alias coverage, so
    # the probe must abstain.
    text2 = "Benny Marinelli ( c. 1902 ) was a jockey ."
    tokens2 = tokens_from_text(text2)
    annotations2 = [
        SpanAnnotation(span=TokenSpan(0, 2), kind=AnnotationKind.GOLD_NP),
        SpanAnnotation(span=TokenSpan(4, 5), kind=AnnotationKind.NP),
        SpanAnnotation(span=TokenSpan(8, 9), kind=AnnotationKind.NP),
    ]
    second = SentenceBundle(
        sentence_id="fp-google-re-0002",
        tokens=tokens2,
        annotations=annotations2,
        attention=build_attention(len(tokens2), {}),
        gold_triples=[Triple(head="Benny Marinelli", relation="date_of_birth",
                             tail="1902")],
    )
    return [first, second]


PREDICATES_TSV = """\
# predicate_id<TAB>label<TAB>alias1|alias2|...
place_of_birth\tplace of birth\tborn in|birthplace
date_of_birth\tdate of birth\tborn|born on
child\tchild\tdaughters|daughter|son|sons|children
spouse\tspouse\twife|husband|married to
place_of_death\tplace of death\tdied in
"""

# Best-effort map into the closed relation category; replace with a curated
# file for full-corpus runs.
TACRED_TASKMAP_TSV = """\
child\tper:children
place_of_birth\tper:city_of_birth
date_of_birth\tper:date_of_birth
spouse\tper:spouse
place_of_death\tper:city_of_death
"""

OIE_GOLD_ROWS = [
    ("Born in Glasgow , Fisher is a graduate of the London Opera Centre .",
     "Fisher", "Born in", "Glasgow"),
    ("Born in Glasgow , Fisher is a graduate of the London Opera Centre .",
     "Fisher", "is a graduate of", "London Opera Centre"),
]

RC_GOLD_ROWS = [("rc-tacred-0001", "per:children")]

FP_GOLD_ROWS = [("fp-google-re-0001", "1941"), ("fp-google-re-0002", "1902")]

# Synthetic position-statistics file: 1 left, 2 middle, 1 right.
POSITION_GOLD_ROWS = [
    ("Born in Glasgow , Fisher is a graduate .", "Fisher", "Born in", "Glasgow"),
    ("Fisher is a graduate of the London Opera Centre .",
     "Fisher", "is a graduate of", "the London Opera Centre"),
    ("He hasn't been able to replace the M'Bow cabal .",
     "He", "hasn't been able to replace", "the M'Bow cabal"),
    ("Denise Maloney Pictou , one of Aquash 's daughters .",
     "Denise Maloney Pictou", "daughters", "Aquash"),
]


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def _write_tsv(path: Path, rows) -> None:
    _write(path, "".join("\t".join(row) + "\n" for row in rows))


def write_fixture_tree(root: str | Path) -> Path:
    """Materialize every fixture dataset, dictionary, and gold file."""
    root = Path(root)

    oie_dir = root / OIE_DATASET
    oie_dir.mkdir(parents=True, exist_ok=True)
    _write(oie_dir / "dataset.json", '{"task": "oie"}\n')
    save_bundle(oie_running_example_bundle(), oie_dir / "s0001")

    rc_dir = root / RC_DATASET
    rc_dir.mkdir(parents=True, exist_ok=True)
    _write(rc_dir / "dataset.json",
           '{"task": "rc", "predicate_dictionary": "../dicts/predicates.tsv", '
           '"category": "tacred", "null_label": "no_relation"}\n')
    save_bundle(rc_sample_bundle(), rc_dir / "s0001")

    fp_dir = root / FP_DATASET
    fp_dir.mkdir(parents=True, exist_ok=True)
    _write(fp_dir / "dataset.json",
           '{"task": "fp", "predicate_dictionary": "../dicts/predicates.tsv"}\n')
    for i, bundle in enumerate(fp_sample_bundles(), start=1):
        save_bundle(bundle, fp_dir / f"s{i:04d}")

    _write(root / DICT_DIR / "predicates.tsv", PREDICATES_TSV)
    _write(root / DICT_DIR / "taskmap.tacred.tsv", TACRED_TASKMAP_TSV)

    _write_tsv(root / GOLD_DIR / "oie_gold.tsv", OIE_GOLD_ROWS)
    _write_tsv(root / GOLD_DIR / "rc_gold.tsv", RC_GOLD_ROWS)
    _write_tsv(root / GOLD_DIR / "fp_gold.tsv", FP_GOLD_ROWS)
    _write_tsv(root / GOLD_DIR / "positions_gold.tsv", POSITION_GOLD_ROWS)
    return root


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m triplex.fixtures <out_root>", file=sys.stderr)
        return 1
    write_fixture_tree(argv[0])
    print(f"fixture tree written to {argv[0]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
