"""Exporter command line: ``lmexport export --model <id> --input <corpus>
--out <dir> --task <t>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from lmexport import __version__
from lmexport.corpus import READERS
from lmexport.export import ExportSpec, export_dataset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmexport",
        description="Export attention bundles for the triple-extraction engine")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="export a corpus to bundle directories")
    p.add_argument("--model", default="seeded",
                   help="attention model: seeded, seeded:subword, hf:<id>")
    p.add_argument("--embed-model", dest="embed_model", default="seeded")
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--task", required=True, choices=["oie", "rc", "fp"])
    p.add_argument("--format", choices=sorted(READERS),
                   help="corpus format; defaults to the task's native format")
    p.add_argument("--max-len", dest="max_len", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embed-triples", dest="embed_triples", action="store_true",
                   help="also write embeddings.f32 with gold-triple vectors")
    p.add_argument("--dict", dest="dict_ref",
                   help="predicate dictionary path recorded in dataset.json")
    p.add_argument("--category", help="decode category recorded in dataset.json")
    p.add_argument("--null-label", dest="null_label")
    p.set_defaults(func=cmd_export)
    return parser


def cmd_export(args) -> int:
    fmt = args.format or args.task
    records = READERS[fmt](Path(args.input))
    if not records:
        print("no sentences in input", file=sys.stderr)
        return 2
    spec = ExportSpec(model=args.model, embed_model=args.embed_model,
                      max_length=args.max_len, seed=args.seed,
                      embed_triples=args.embed_triples)
    meta = {}
    if args.dict_ref:
        meta["predicate_dictionary"] = args.dict_ref
    if args.category:
        meta["category"] = args.category
    if args.null_label:
        meta["null_label"] = args.null_label
    out = export_dataset(records, spec, Path(args.out), task=args.task,
                         dataset_meta=meta)
    print(f"exported {len(records)} bundle(s) to {out}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
