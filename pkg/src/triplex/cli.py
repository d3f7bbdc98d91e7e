"""Command-line pipeline: extract, evaluate, stats, rank-toy-train,
validate-bundle.

Configuration precedence is CLI flag > config file (JSON) > task default.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Extraction output is deterministic: records are ordered by
sentence id and carry no timestamps, so identical runs produce
byte-identical prediction files; run metadata (config hash, bundle
checksums, stage timings) goes to a separate manifest.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from triplex import __version__
from triplex.aliases import (
    DictionaryError,
    IDENTITY_TASK_MAP,
    attach_task_map,
    load_dictionary,
)
from triplex.bundle import (
    ATTENTION_FILE,
    MANIFEST_FILE,
    BundleError,
    DatasetInfo,
    load_bundle,
    load_dataset_info,
    save_bundle,
    validate_attention,
)
from triplex.evaluation import (
    GOLD_FORMAT_OIE2016,
    GOLD_FORMAT_SPEC,
    MatchPolicy,
    PRCurve,
    group_gold_by_sentence,
    grouped_pr_curve,
    grouped_prf_at_threshold,
    p_at_1,
    rc_f1,
    read_labeled_gold,
    read_oie_gold,
    relation_position_stats,
)
from triplex.figures import render_position_counts, render_pr_curve
from triplex.ranking import (
    RANKED,
    RAW_SEARCH_SCORE,
    PrecomputedProvider,
    RankingError,
    ToyEncoder,
    train_toy_encoder,
)
from triplex.records import (
    fp_record,
    label_predictions,
    oie_extractions,
    oie_record,
    read_records,
    rc_record,
    write_records,
)
from triplex.search import BeamParams, PositionMode
from triplex.tasks import (
    TASK_FP,
    TASK_OIE,
    TASK_RC,
    default_config,
    run_factual_probe,
    run_oie,
    run_relation_classification,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; remap to the documented 1.
    def error(self, message):
        raise UsageError(message)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return config


def _resolve(cli_value, config: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return default


def _build_provider(name: str, bundle, seed: Optional[int]):
    if name == "toy":
        return ToyEncoder() if seed is None else ToyEncoder(seed=seed)
    if name == "precomputed":
        return PrecomputedProvider(bundle)
    raise UsageError(f"unknown provider {name!r} (choose toy or precomputed)")


def _load_dictionary_for(info: DatasetInfo, dict_override: Optional[str],
                         category: Optional[str]):
    dict_path = Path(dict_override) if dict_override else info.predicate_dictionary
    if dict_path is None:
        return None
    dictionary = load_dictionary(dict_path)
    if category:
        if category == IDENTITY_TASK_MAP:
            attach_task_map(dictionary, category, IDENTITY_TASK_MAP)
        else:
            taskmap_path = dict_path.parent / f"taskmap.{category}.tsv"
            if not taskmap_path.is_file():
                raise BundleError(f"no task map for category {category!r}: "
                                  f"expected {taskmap_path}")
            attach_task_map(dictionary, category, taskmap_path)
    return dictionary


def cmd_extract(args) -> int:
    config_file = _load_config_file(args.config)
    t_start = time.perf_counter()
    info = load_dataset_info(args.dataset)
    task = _resolve(args.task, config_file, "task", info.task)
    if task != info.task:
        raise BundleError(f"--task {task} conflicts with dataset task {info.task!r}")

    beam_size = _resolve(args.beam_size, config_file, "beam_size",
                         20 if task == TASK_FP else 6)
    top_n = _resolve(args.top_n, config_file, "top_n",
                     10 if task == TASK_RC else 1)
    max_steps = _resolve(args.max_steps, config_file, "max_steps", 10)
    between_only = args.between_only or config_file.get("between_only", False)
    no_ranking = args.no_ranking or config_file.get("no_ranking", False)
    provider_name = _resolve(args.provider, config_file, "provider", "toy")
    workers = _resolve(args.workers, config_file, "workers", 1)
    seed = _resolve(args.seed, config_file, "seed", None)
    category = _resolve(None, config_file, "category", info.category)
    null_label = _resolve(None, config_file, "null_label", info.null_label)

    modes = ((PositionMode.BETWEEN,) if between_only
             else (PositionMode.BETWEEN, PositionMode.LEFT_OF_BOTH,
                   PositionMode.RIGHT_OF_BOTH))
    beam = BeamParams(beam_size=int(beam_size), max_steps=int(max_steps),
                      position_modes=modes)
    config = default_config(
        task, top_n=int(top_n), beam=beam,
        ranking_mode=RAW_SEARCH_SCORE if no_ranking else RANKED,
        category=category, null_label=null_label,
    )
    dictionary = _load_dictionary_for(info, args.dict, category)
    if task == TASK_RC and dictionary is None:
        raise BundleError("relation classification requires --dict or a "
                          "dataset predicate_dictionary")

    resolved = {
        "task": task,
        "beam_size": beam.beam_size,
        "max_steps": beam.max_steps,
        "top_n": config.top_n,
        "between_only": bool(between_only),
        "no_ranking": bool(no_ranking),
        "provider": provider_name,
        "workers": int(workers),
        "seed": seed,
        "category": category,
        "null_label": null_label,
        "dataset": str(Path(args.dataset).resolve()),
    }
    t_setup = time.perf_counter()

    # The toy provider is stateless; precomputed vectors are per-bundle.
    shared_provider = (_build_provider(provider_name, None, seed)
                       if provider_name == "toy" and not no_ranking else None)

    def process(bundle_dir: Path) -> tuple[str, dict]:
        bundle = load_bundle(bundle_dir)
        provider = (None if no_ranking else
                    shared_provider or _build_provider(provider_name, bundle, seed))
        if task == TASK_OIE:
            record = oie_record(bundle, run_oie(bundle, config, provider))
        elif task == TASK_RC:
            record = rc_record(bundle, run_relation_classification(
                bundle, config, provider, dictionary))
        else:
            record = fp_record(bundle, run_factual_probe(
                bundle, config, provider, dictionary))
        return bundle.sentence_id, record

    results: list[tuple[str, dict]] = []
    if int(workers) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(process, info.bundle_dirs))
    else:
        results = [process(d) for d in info.bundle_dirs]
    # Output order is by sentence id regardless of scheduling.
    results.sort(key=lambda item: item[0])
    t_extract = time.perf_counter()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictions_path = out_dir / "predictions.jsonl"
    write_records(predictions_path, (record for _, record in results))

    checksums = {}
    for bundle_dir in info.bundle_dirs:
        checksums[bundle_dir.name] = {
            "manifest": _sha256_file(bundle_dir / MANIFEST_FILE),
            "attention": _sha256_file(bundle_dir / ATTENTION_FILE),
        }
    manifest = {
        "engine_version": __version__,
        "config": resolved,
        "config_sha256": hashlib.sha256(
            json.dumps(resolved, sort_keys=True).encode()).hexdigest(),
        "bundle_sha256": checksums,
        "timings_s": {
            "setup": round(t_setup - t_start, 6),
            "extract": round(t_extract - t_setup, 6),
        },
        "sentences": len(results),
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(results)} prediction records to {predictions_path}")
    return EXIT_OK


def _write_pr_csv(curve: PRCurve, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,precision,recall\n")
        for point in curve.points:
            fh.write(f"{point.threshold:.6f},{point.precision:.6f},"
                     f"{point.recall:.6f}\n")
        best = curve.best_f1_point
        best_f1 = best.f1 if best else 0.0
        best_t = best.threshold if best else 0.0
        fh.write(f"# auc={curve.auc:.6f} best_f1={best_f1:.6f} "
                 f"best_f1_threshold={best_t:.6f}\n")


def cmd_evaluate(args) -> int:
    records = read_records(args.pred)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    if args.task == TASK_OIE:
        gold_entries = read_oie_gold(args.gold, fmt=args.gold_format)
        gold_by_sentence = group_gold_by_sentence(gold_entries)
        policy = MatchPolicy(min_overlap=args.min_overlap,
                             require_head_match=not args.no_head_match)
        predicted_by_sentence = oie_extractions(records)
        unmatched = set(predicted_by_sentence) - set(gold_by_sentence)
        if unmatched:
            print(f"warning: {len(unmatched)} predicted sentence(s) have no gold "
                  "entry and count against precision only", file=sys.stderr)
        # Matching is confined to each sentence; confidences are comparable
        # across sentences, so counts pool globally.
        groups = [(extractions, gold_by_sentence.get(key, []))
                  for key, extractions in predicted_by_sentence.items()]
        groups.extend(([], gold_by_sentence[key])
                      for key in set(gold_by_sentence) - set(predicted_by_sentence))
        n_pred = sum(len(p) for p, _ in groups)
        n_gold = sum(len(g) for _, g in groups)

        threshold = args.threshold if args.threshold is not None else 0.0
        precision, recall, f1 = grouped_prf_at_threshold(groups, policy, threshold)
        curve = grouped_pr_curve(groups, policy)
        print(f"P={precision:.4f} R={recall:.4f} F1={f1:.4f} AUC={curve.auc:.4f} "
              f"(threshold={threshold:g}, n_pred={n_pred}, n_gold={n_gold})")
        if out_dir:
            _write_pr_csv(curve, out_dir / "pr_curve.csv")
            render_pr_curve(curve, out_dir / "pr_curve.png")
            print(f"wrote {out_dir / 'pr_curve.csv'} and {out_dir / 'pr_curve.png'}")
        return EXIT_OK

    gold = read_labeled_gold(args.gold)
    if args.task == TASK_RC:
        preds = label_predictions(records)
        null_label = args.null_label
        full = {sid: (preds.get(sid) if preds.get(sid) is not None
                      else (null_label if null_label is not None else "<abstain>"))
                for sid in gold}
        score = rc_f1(full, gold, null_label=null_label)
        print(f"F1={score:.4f} (n={len(gold)}, null_label={null_label})")
        return EXIT_OK
    if args.task == TASK_FP:
        preds = label_predictions(records)
        aligned = {sid: preds.get(sid) for sid in gold}
        score = p_at_1(aligned, gold)
        print(f"P@1={score:.4f} (n={len(gold)})")
        return EXIT_OK
    raise UsageError(f"unknown task {args.task!r}")


def cmd_stats(args) -> int:
    entries = read_oie_gold(args.gold, fmt=args.gold_format)
    counts = relation_position_stats(entries)
    print(f"left={counts.left} right={counts.right} middle={counts.middle} "
          f"total={counts.total} unlocated={counts.unlocated} "
          f"outside_pair={100 * counts.outside_fraction:.1f}%")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "positions.csv", "w", encoding="utf-8") as fh:
            fh.write("bin,count\n")
            fh.write(f"left,{counts.left}\n")
            fh.write(f"right,{counts.right}\n")
            fh.write(f"middle,{counts.middle}\n")
            fh.write(f"unlocated,{counts.unlocated}\n")
        render_position_counts(counts, out_dir / "positions.png")
        print(f"wrote {out_dir / 'positions.csv'} and {out_dir / 'positions.png'}")
    return EXIT_OK


def cmd_rank_toy_train(args) -> int:
    pairs = []
    with open(args.pairs, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise BundleError(f"{args.pairs}:{lineno}: expected "
                                  "sentence<TAB>triple")
            pairs.append((parts[0], parts[1]))
    if len(pairs) < 2:
        raise BundleError("need at least 2 (sentence, triple) pairs")

    encoder = ToyEncoder(feature_dim=args.feature_dim, dim=args.dim,
                         seed=args.seed)
    batch_size = max(2, args.batch_size)
    batches = []
    for start in range(0, len(pairs) - 1, batch_size):
        chunk = pairs[start:start + batch_size]
        if len(chunk) < 2:
            break
        A = np.stack([encoder.features(s) for s, _ in chunk])
        B = np.stack([encoder.features(t) for _, t in chunk])
        batches.append((A, B))
    encoder, history = train_toy_encoder(batches, epochs=args.epochs,
                                         step_size=args.step_size,
                                         encoder=encoder)
    np.savez(args.out, weights=encoder.weights,
             feature_dim=encoder.feature_dim, dim=encoder.dim)
    print(f"initial_loss={history.initial:.6f} final_loss={history.final:.6f} "
          f"epochs={args.epochs} batches={len(batches)}")
    print(f"saved encoder weights to {args.out}")
    return EXIT_OK


def cmd_validate_bundle(args) -> int:
    bundle = load_bundle(args.bundle, check_attention=False)
    report = validate_attention(bundle.attention, tolerance=args.tolerance)
    status = EXIT_OK
    if report.ok:
        print(f"{bundle.sentence_id}: attention {report.size}x{report.size} valid")
    else:
        for line in report.describe():
            print(f"{bundle.sentence_id}: {line}")
        status = EXIT_DATA
    if args.roundtrip_check:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            save_bundle(bundle, tmp)
            original = (Path(args.bundle) / ATTENTION_FILE).read_bytes()
            rewritten = (Path(tmp) / ATTENTION_FILE).read_bytes()
            if original == rewritten:
                print(f"{bundle.sentence_id}: round-trip byte-identical")
            else:
                print(f"{bundle.sentence_id}: round-trip NOT byte-identical")
                status = EXIT_DATA
            reloaded = load_bundle(tmp, check_attention=False)
            if reloaded != bundle:
                print(f"{bundle.sentence_id}: reloaded bundle differs")
                status = EXIT_DATA
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triplex",
                     description="Zero-shot triple extraction over attention "
                                 "matrices")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="run a task over a dataset")
    p_extract.add_argument("--dataset", required=True)
    p_extract.add_argument("--out", required=True)
    p_extract.add_argument("--config", help="JSON config file")
    p_extract.add_argument("--task", choices=[TASK_OIE, TASK_RC, TASK_FP])
    p_extract.add_argument("--beam-size", type=int, dest="beam_size")
    p_extract.add_argument("--top-n", type=int, dest="top_n")
    p_extract.add_argument("--max-steps", type=int, dest="max_steps")
    p_extract.add_argument("--between-only", action="store_true")
    p_extract.add_argument("--no-ranking", action="store_true")
    p_extract.add_argument("--provider", choices=["toy", "precomputed"])
    p_extract.add_argument("--dict", help="predicate dictionary TSV")
    p_extract.add_argument("--workers", type=int)
    p_extract.add_argument("--seed", type=int)
    p_extract.set_defaults(func=cmd_extract)

    p_eval = sub.add_parser("evaluate", help="score predictions against gold")
    p_eval.add_argument("--task", required=True,
                        choices=[TASK_OIE, TASK_RC, TASK_FP])
    p_eval.add_argument("--pred", required=True, help="predictions.jsonl")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--gold-format", dest="gold_format",
                        choices=[GOLD_FORMAT_SPEC, GOLD_FORMAT_OIE2016],
                        default=GOLD_FORMAT_SPEC)
    p_eval.add_argument("--threshold", type=float)
    p_eval.add_argument("--min-overlap", type=float, dest="min_overlap",
                        default=0.5)
    p_eval.add_argument("--no-head-match", action="store_true",
                        dest="no_head_match")
    p_eval.add_argument("--null-label", dest="null_label")
    p_eval.add_argument("--out", help="directory for PR CSV and figure")
    p_eval.set_defaults(func=cmd_evaluate)

    p_stats = sub.add_parser("stats", help="relation-position statistics of a "
                                           "gold file")
    p_stats.add_argument("--gold", required=True)
    p_stats.add_argument("--gold-format", dest="gold_format",
                         choices=[GOLD_FORMAT_SPEC, GOLD_FORMAT_OIE2016],
                         default=GOLD_FORMAT_SPEC)
    p_stats.add_argument("--out", help="directory for CSV and figure")
    p_stats.set_defaults(func=cmd_stats)

    p_train = sub.add_parser("rank-toy-train",
                             help="train the toy ranking encoder")
    p_train.add_argument("--pairs", required=True,
                         help="sentence<TAB>triple TSV")
    p_train.add_argument("--out", required=True, help="output .npz")
    p_train.add_argument("--epochs", type=int, default=50)
    p_train.add_argument("--batch-size", type=int, dest="batch_size", default=8)
    p_train.add_argument("--step-size", type=float, dest="step_size", default=1.0)
    p_train.add_argument("--feature-dim", type=int, dest="feature_dim",
                         default=512)
    p_train.add_argument("--dim", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_rank_toy_train)

    p_validate = sub.add_parser("validate-bundle",
                                help="validate one bundle directory")
    p_validate.add_argument("bundle")
    p_validate.add_argument("--tolerance", type=float, default=1e-3)
    p_validate.add_argument("--roundtrip-check", action="store_true",
                            dest="roundtrip_check")
    p_validate.set_defaults(func=cmd_validate_bundle)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BundleError, DictionaryError, RankingError, OSError,
            ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
