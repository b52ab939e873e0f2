"""Command-line entry point.

One binary, one subcommand per workflow: augment, build-dataset, split,
protoclass, metrics, rank, harness, params. Flags win over the
LEAFKIT_SEED environment variable, which wins over defaults. Every
subcommand is deterministic given identical inputs and seeds, and none of
them write into their input locations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import augment as aug
from . import dataset as ds
from . import harness as hn
from . import metrics as mt
from . import protoclass as pc
from . import tensorkit as tk
from .errors import InvalidArgumentError, LeafkitError

MODES = {m.value: m for m in aug.AugmentationMode}


def _default_seed() -> int:
    env = os.environ.get("LEAFKIT_SEED")
    return int(env) if env else 0


def _scan_images(root: Path) -> list[str]:
    ids = [
        p.relative_to(root).as_posix()
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in aug.imageio.READABLE_SUFFIXES
    ]
    return sorted(ids)


# --------------------------------------------------------------------------
# subcommand implementations


def _cmd_augment(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        raise InvalidArgumentError(f"input directory not found: {in_dir}")
    if out_dir.resolve() == in_dir.resolve():
        raise InvalidArgumentError("output directory must differ from input")
    source_ids = _scan_images(in_dir)
    if not source_ids:
        raise InvalidArgumentError(f"no readable images under {in_dir}")
    plan = aug.build_plan(MODES[args.mode], source_ids, args.seed)

    def source_info(sid: str):
        parts = Path(sid).parts
        cls = parts[0] if len(parts) > 1 else ""
        return args.source_name, cls

    rows = aug.execute_plan(
        plan,
        aug.DirectoryLoader(in_dir),
        aug.DirectorySink(out_dir, image_format=args.format),
        source_info=source_info,
        jobs=args.jobs,
    )
    manifest_path = Path(args.manifest) if args.manifest else out_dir / "manifest.jsonl"
    manifest_path.unlink(missing_ok=True)
    aug.append_fragment(rows, manifest_path)
    print(
        f"mode={args.mode} sources={len(source_ids)} outputs={len(rows)} "
        f"manifest={manifest_path}"
    )
    return 0


def _load_sources_file(path: Path):
    raw = json.loads(path.read_text(encoding="utf-8"))
    sources = []
    for entry in raw:
        name = entry["name"]
        if "classes" in entry:
            sources.append((name, entry["classes"]))
        elif "root" in entry:
            root = Path(entry["root"])
            if not root.is_absolute():
                root = path.parent / root
            classes = {}
            for cls_dir in sorted(p for p in root.iterdir() if p.is_dir()):
                files = sorted(
                    str(p)
                    for p in cls_dir.rglob("*")
                    if p.is_file() and p.suffix.lower() in aug.imageio.READABLE_SUFFIXES
                )
                if files:
                    classes[cls_dir.name] = files
            sources.append((name, classes))
        else:
            raise InvalidArgumentError(
                f"source {name!r} needs either a 'classes' map or a 'root' directory"
            )
    return sources


def _cmd_build_dataset(args) -> int:
    sources = _load_sources_file(Path(args.sources))
    rules = ds.load_class_rules(args.rules) if args.rules else []
    manifest = ds.merge_sources(sources)
    manifest = ds.apply_class_rules(manifest, rules, min_size=args.min_class_size)
    manifest = ds.stratified_split(
        manifest, ds.SplitSpec("holdout", args.test_fraction, seed=args.seed)
    )
    manifest = ds.balance_to_target(
        manifest, args.target, MODES[args.mode], seed=args.seed
    )
    manifest = ds.stratified_split(
        manifest, ds.SplitSpec("train_val", args.val_fraction, seed=args.seed)
    )
    manifest.metadata["global_seed"] = args.seed
    out_dir = Path(args.out)
    ds.write_manifest(manifest, out_dir / "manifest.jsonl")
    summary = ds.summarize(manifest)
    (out_dir / "summary.json").write_text(
        json.dumps(summary.__dict__, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(
        f"classes={summary.class_count} total={summary.total} "
        f"train={summary.split_totals.get('train', 0)} "
        f"val={summary.split_totals.get('val', 0)} "
        f"test={summary.split_totals.get('test', 0)}"
    )
    return 0


def _cmd_split(args) -> int:
    in_path = Path(args.manifest)
    out_path = Path(args.out)
    if out_path.resolve() == in_path.resolve():
        raise InvalidArgumentError("output manifest must differ from input")
    manifest = ds.read_manifest(in_path)
    kind = args.kind.replace("-", "_")
    fraction = args.ratio if kind == "ratio" else args.fraction
    if fraction is None:
        raise InvalidArgumentError("this split kind needs --fraction")
    manifest = ds.stratified_split(manifest, ds.SplitSpec(kind, fraction, seed=args.seed))
    ds.write_manifest(manifest, out_path)
    for cls, count in sorted(manifest.class_counts().items()):
        sides = {
            s: sum(
                1 for r in manifest.records if r.final_class == cls and r.split == s
            )
            for s in ("train", "val", "test")
        }
        print(f"{cls}: total={count} " + " ".join(f"{k}={v}" for k, v in sides.items()))
    return 0


def _cmd_protoclass(args) -> int:
    if args.action == "build":
        if not args.support or not args.out:
            raise InvalidArgumentError("protoclass build needs --support and --out")
        supports = pc.parse_embeddings(args.support)
        protos = pc.build_prototypes(supports, pc.ShotConfig(args.shots, args.seed))
        rows = [
            pc.Embedding(label, label, vec)
            for label, vec in sorted(protos.prototypes.items())
        ]
        pc.write_embeddings(rows, args.out)
        print(f"prototypes={len(rows)} dim={protos.dimension} shots={protos.shots}")
        return 0

    if not args.prototypes or not args.queries:
        raise InvalidArgumentError(
            f"protoclass {args.action} needs --prototypes and --queries"
        )
    proto_rows = pc.parse_embeddings(args.prototypes)
    protos = pc.PrototypeSet(
        dimension=proto_rows[0].dimension,
        prototypes={e.label: e.vector for e in proto_rows},
        shots=args.shots,
    )
    queries = pc.parse_embeddings(args.queries)
    if args.action == "predict":
        predictions = pc.predict_batch(queries, protos)
        lines = [f"{q.id},{p}" for q, p in zip(queries, predictions)]
        if args.out:
            Path(args.out).write_text("id,predicted\n" + "\n".join(lines) + "\n")
        else:
            print("id,predicted")
            for line in lines:
                print(line)
        return 0
    report = pc.evaluate(queries, protos)
    print(
        json.dumps(
            {
                "accuracy": report.accuracy,
                "macro_precision": report.macro_precision,
                "macro_recall": report.macro_recall,
                "macro_f1": report.macro_f1,
                "queries": len(queries),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def _cmd_metrics(args) -> int:
    import csv as _csv

    pairs = []
    with Path(args.pairs).open("r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header and [h.strip().lower() for h in header[:2]] != ["true", "predicted"]:
            pairs.append((header[0], header[1]))  # headerless file
        for row in reader:
            if row:
                pairs.append((row[0], row[1]))
    labels = (
        args.labels.split(",")
        if args.labels
        else sorted({t for t, _ in pairs} | {p for _, p in pairs})
    )
    report = mt.compute_report(mt.confusion_from_pairs(pairs, labels))
    out = {
        "accuracy": report.accuracy,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "macro_f1": report.macro_f1,
        "weighted_f1": report.weighted_f1,
        "per_class": [c.__dict__ for c in report.per_class],
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_rank(args) -> int:
    if args.by == "avg-metric":
        if not args.runs:
            raise InvalidArgumentError("rank --by avg-metric needs --runs")
        records = mt.read_run_csv(args.runs)
        phase = "ft" if args.metric.endswith("_ft") else "tl"
        metric = "accuracy" if args.metric.startswith("acc") else "macro_f1"
        means = mt.aggregate_mean(
            [r for r in records if r.phase == phase], group_by="model"
        )
        table = mt.rank_by_value([(name, vals[metric]) for name, vals in means])
    else:
        if args.ranks:
            ranks = json.loads(Path(args.ranks).read_text(encoding="utf-8"))
        elif args.runs:
            records = mt.read_run_csv(args.runs)
            metric = "accuracy" if args.metric.startswith("acc") else "macro_f1"
            phase = "ft" if args.metric.endswith("_ft") else "tl"
            ranks = mt.ranks_per_dataset(records, metric=metric, phase=phase)
        else:
            raise InvalidArgumentError("rank --by avg-rank needs --ranks or --runs")
        table = mt.average_rank(ranks)
    print(table.to_text())
    if args.out:
        mt.write_ranking_csv(table, args.out)
    return 0


def _cmd_harness(args) -> int:
    cfg = hn.ExperimentConfig.from_json(args.config)
    logs = []
    for _ in range(args.repeats):
        trainer = hn.ScriptedTrainer.from_json(args.mock_trainer)
        logs.append((args.model, args.dataset, hn.run_experiment(trainer, cfg)))
    rows = hn.emit_results(logs, args.out_csv, args.out_jsonl)
    for _, _, log in logs[-1:]:
        for phase in log.phases:
            print(
                f"phase={phase.name} epochs={len(phase.epochs)} "
                f"best_epoch={phase.best_epoch} stopped_early={phase.stopped_early}"
            )
    print(f"rows={len(rows)} csv={args.out_csv}")
    return 0


def _cmd_params(args) -> int:
    head = tk.dense_param_count(args.head_inputs, args.head_classes, bias=True)
    ca = tk.ca_param_count(
        args.ca_channels, args.ca_ratio, shared=not args.separate, bias=args.bias
    )
    print(f"classifier head ({args.head_inputs} -> {args.head_classes}, bias): {head:,}")
    print(
        f"channel attention (C={args.ca_channels}, r={args.ca_ratio}, "
        f"{'separate' if args.separate else 'shared'}, "
        f"{'bias' if args.bias else 'no bias'}): {ca:,}"
    )
    if args.base_total:
        print(f"base total: {args.base_total:,}")
        print(f"with attention block: {args.base_total + ca:,}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafkit",
        description="Dataset engineering and evaluation toolkit for leaf-disease "
        "classification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    seed_default = _default_seed()

    p = sub.add_parser("augment", help="render an augmentation plan over a directory")
    p.add_argument("--mode", choices=sorted(MODES), required=True)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--in", dest="in_dir", required=True, help="input image directory")
    p.add_argument("--out", dest="out_dir", required=True, help="output directory")
    p.add_argument("--format", choices=("png", "ppm"), default="png")
    p.add_argument("--manifest", help="fragment path (default <out>/manifest.jsonl)")
    p.add_argument("--source-name", default="local")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("build-dataset", help="merge, clean, split and balance sources")
    p.add_argument("--sources", required=True, help="JSON source listing")
    p.add_argument("--rules", help="JSON class cleanup rules")
    p.add_argument("--min-class-size", type=int, default=200)
    p.add_argument("--target", type=int, default=3500)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--mode", choices=sorted(MODES), default="combined")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("split", help="stratified split of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", type=float, help="train fraction for kind=ratio")
    p.add_argument("--fraction", type=float, help="fraction for holdout/train-val kinds")
    p.add_argument("--kind", choices=("ratio", "holdout", "train-val"), default="ratio")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("protoclass", help="nearest-prototype classification")
    p.add_argument("action", choices=("build", "predict", "eval"))
    p.add_argument("--support", help="support embedding CSV (build)")
    p.add_argument("--prototypes", help="prototype CSV (predict/eval)")
    p.add_argument("--queries", help="query embedding CSV (predict/eval)")
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_protoclass)

    p = sub.add_parser("metrics", help="score a (true, predicted) pair file")
    p.add_argument("--pairs", required=True, help="CSV of true,predicted labels")
    p.add_argument("--labels", help="comma-separated label order")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("rank", help="build a model leaderboard")
    p.add_argument("--by", choices=("avg-metric", "avg-rank"), required=True)
    p.add_argument("--runs", help="benchmark run CSV")
    p.add_argument("--ranks", help="JSON map model -> per-dataset ranks")
    p.add_argument("--metric", default="acc_ft",
                   choices=("acc", "f1", "acc_ft", "f1_ft"))
    p.add_argument("--out", help="also write the leaderboard as CSV")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("harness", help="run the two-phase experiment loop")
    p.add_argument("action", choices=("run",))
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--mock-trainer", required=True, help="scripted trainer JSON")
    p.add_argument("--model", default="scripted")
    p.add_argument("--dataset", default="scripted")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out-csv", default="results.csv")
    p.add_argument("--out-jsonl")
    p.set_defaults(func=_cmd_harness)

    p = sub.add_parser("params", help="parameter accounting for head and attention")
    p.add_argument("--head-classes", type=int, required=True)
    p.add_argument("--head-inputs", type=int, default=1920)
    p.add_argument("--ca-channels", type=int, default=1920)
    p.add_argument("--ca-ratio", type=int, default=8)
    p.add_argument("--separate", action="store_true",
                   help="count an independent MLP per pooling branch")
    p.add_argument("--bias", action="store_true")
    p.add_argument("--base-total", type=int,
                   help="baseline parameter total to add the block onto")
    p.set_defaults(func=_cmd_params)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LeafkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
