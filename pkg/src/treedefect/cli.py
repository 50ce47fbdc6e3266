"""Command-line front end: seeded, file-based, reproducible pipeline runs.

Subcommands: ingest, vocab, pretrain, featurize, train-classifier, evaluate,
experiment, stats. Option precedence is flags > --config file > defaults.
Exit codes: 0 success, 1 a produced report carries undefined-metric flags,
2 usage or input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import jsonio
from .classifiers import (FeatureMatrix, bow_featurize, featurize_corpus,
                          load_classifier, predict, predict_proba, read_features_csv,
                          save_classifier, write_features_csv)
from .corpus import (FileRecord, Vocabulary, build_vocabulary, corpus_from_document,
                     normalize_labels, read_corpus, write_corpus)
from .errors import DocumentError, TreeDefectError
from .evaluation import evaluate_predictions, write_report_csv, write_report_json
from .experiments import (ClassifierOptions, CvDescriptor, PairsDescriptor,
                          cv_from_folds, cv_feature_folds, dataset_stats,
                          format_stats_table, parse_descriptor, train_classifier,
                          version_pair_run)
from .minilang import parse_mini
from .pretrain import TrainConfig, pretrain, write_training_log
from .treelstm import forward_root, load_model, save_model


def _load_config_file(path: str, defaults: dict) -> dict:
    doc = jsonio.read(path)
    if not isinstance(doc, dict):
        raise DocumentError(f"{path}: config must be an object")
    unknown = [k for k in doc if k not in defaults]
    if unknown:
        raise DocumentError(f"{path}: unknown config key {unknown[0]!r}")
    return doc


def _merge_options(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults."""
    opts = dict(defaults)
    if getattr(args, "config", None):
        opts.update(_load_config_file(args.config, defaults))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def _parse_split(value) -> tuple[float, float, float]:
    if isinstance(value, str):
        parts = value.split(",")
    else:
        parts = list(value)
    try:
        fractions = tuple(float(p) for p in parts)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"bad split {value!r}: expected three fractions") from exc
    if len(fractions) != 3:
        raise DocumentError(f"bad split {value!r}: expected three fractions")
    return fractions


_TRAIN_DEFAULTS = {
    "seed": 0, "learning_rate": 0.001, "rms_decay": 0.9, "rms_epsilon": 1e-6,
    "dropout_rate": 0.5, "max_epochs": 30, "patience": 5, "batch_size": 8,
    "split": "0.8,0.1,0.1", "embedding_dim": 32, "hidden_dim": None,
    "vocab_size": 10000, "min_count": 2, "depth_limit": 10000,
}

_CLASSIFIER_DEFAULTS = {
    "l2": 1e-4, "n_trees": 100, "max_depth": 16, "min_leaf": 1,
    "features_per_split": None,
}


def _train_config(opts: dict) -> TrainConfig:
    try:
        return TrainConfig(
            learning_rate=opts["learning_rate"], rms_decay=opts["rms_decay"],
            rms_epsilon=opts["rms_epsilon"], dropout_rate=opts["dropout_rate"],
            max_epochs=opts["max_epochs"], patience=opts["patience"],
            seed=opts["seed"], split=_parse_split(opts["split"]),
            batch_size=opts["batch_size"], embedding_dim=opts["embedding_dim"],
            hidden_dim=opts["hidden_dim"], vocab_size=opts["vocab_size"],
            min_count=opts["min_count"], depth_limit=opts["depth_limit"])
    except ValueError as exc:
        raise DocumentError(f"bad training option: {exc}") from exc


def _classifier_options(kind: str, opts: dict) -> ClassifierOptions:
    try:
        return ClassifierOptions(kind, opts["l2"], opts["n_trees"],
                                 opts["max_depth"], opts["min_leaf"],
                                 opts["features_per_split"])
    except ValueError as exc:
        raise DocumentError(f"bad classifier option: {exc}") from exc


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--rms-decay", type=float, dest="rms_decay")
    p.add_argument("--rms-epsilon", type=float, dest="rms_epsilon")
    p.add_argument("--dropout-rate", type=float, dest="dropout_rate")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--split", help="train,val,test fractions, e.g. 0.8,0.1,0.1")
    p.add_argument("--embedding-dim", type=int, dest="embedding_dim")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--vocab-size", type=int, dest="vocab_size")
    p.add_argument("--min-count", type=int, dest="min_count")
    p.add_argument("--depth-limit", type=int, dest="depth_limit")


def _add_classifier_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--l2", type=float)
    p.add_argument("--n-trees", type=int, dest="n_trees")
    p.add_argument("--max-depth", type=int, dest="max_depth")
    p.add_argument("--min-leaf", type=int, dest="min_leaf")
    p.add_argument("--features-per-split", type=int, dest="features_per_split")


def _read_labels_file(path: str) -> dict[str, int]:
    import csv

    labels = {}
    try:
        with Path(path).open("r", encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or (lineno == 1 and row[:2] == ["file_id", "label"]):
                    continue
                if len(row) != 2 or row[1] not in ("0", "1"):
                    raise DocumentError(
                        f"{path}:{lineno}: expected 'file_id,label' with label 0 or 1")
                labels[row[0]] = int(row[1])
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror or exc}") from exc
    return labels


def _iter_input_files(inputs: list[str]) -> list[tuple[Path, str]]:
    """(path, file_id) pairs for every source/document file under `inputs`."""
    found = []
    for raw in inputs:
        path = Path(raw)
        if path.is_dir():
            files = sorted(p for p in path.rglob("*") if p.is_file())
            if not files:
                raise DocumentError(f"{path}: directory contains no files")
            found.extend((p, p.relative_to(path).as_posix()) for p in files)
        elif path.is_file():
            found.append((path, path.name))
        else:
            raise DocumentError(f"{path}: no such file or directory")
    if not found:
        raise DocumentError("no input files given")
    return found


def cmd_ingest(args: argparse.Namespace) -> int:
    labels = _read_labels_file(args.labels) if args.labels else {}
    records: list[FileRecord] = []
    failures: list[str] = []
    seen = set()
    for path, file_id in _iter_input_files(args.inputs):
        try:
            if path.suffix == ".json":
                records.extend(corpus_from_document(jsonio.read(path), str(path)))
                continue
            source = path.read_text(encoding="utf-8")
            tree = normalize_labels(parse_mini(source))
            records.append(FileRecord(file_id, args.project, args.version,
                                      labels.get(file_id), tree))
        except (TreeDefectError, OSError, UnicodeDecodeError) as exc:
            failures.append(f"{path}: {exc}")
    for failure in failures:
        print(failure, file=sys.stderr)
    if failures and not args.skip_bad:
        print(f"ingest failed: {len(failures)} bad input file(s)", file=sys.stderr)
        return 2
    if failures:
        print(f"warning: skipped {len(failures)} bad input file(s)", file=sys.stderr)
    for r in records:
        if r.key in seen:
            raise DocumentError(f"duplicate entry for {r.key}")
        seen.add(r.key)
    if not records:
        raise DocumentError("no valid input files; nothing to ingest")
    write_corpus(args.output, records)
    print(format_stats_table(dataset_stats(records)))
    print(f"wrote {len(records)} records to {args.output}")
    return 0


def cmd_vocab(args: argparse.Namespace) -> int:
    records = read_corpus(args.corpus)
    vocab = build_vocabulary([r.tree for r in records], args.size, args.min_count)
    jsonio.write(args.output, {"format_version": 1, "tokens": list(vocab.tokens)})
    print(f"wrote vocabulary of {len(vocab)} tokens to {args.output}")
    return 0


def _load_vocab_file(path: str) -> Vocabulary:
    doc = jsonio.read(path)
    if (not isinstance(doc, dict) or doc.get("format_version") != 1
            or not isinstance(doc.get("tokens"), list)
            or not all(isinstance(t, str) for t in doc["tokens"])):
        raise DocumentError(f"{path}: not a vocabulary file")
    try:
        return Vocabulary(tuple(doc["tokens"]))
    except ValueError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


def cmd_pretrain(args: argparse.Namespace) -> int:
    opts = _merge_options(args, _TRAIN_DEFAULTS)
    config = _train_config(opts)
    records = read_corpus(args.corpus)
    vocab = _load_vocab_file(args.vocab) if args.vocab else None
    result = pretrain(records, config, vocab)
    save_model(args.output, result.model, result.head.U)
    if args.log:
        write_training_log(args.log, result.log)
    if result.best_epoch is None:
        print(f"wrote initialized model to {args.output} (0 epochs)")
    else:
        print(f"wrote model to {args.output}: best epoch {result.best_epoch}, "
              f"validation perplexity {result.val_perplexity:.4f}, "
              f"test perplexity {result.test_perplexity:.4f}")
    return 0


def _featurize_tree(records, model, depth_limit: int, jobs: int) -> FeatureMatrix:
    if jobs <= 1 or len(records) < 2:
        return featurize_corpus(records, model, depth_limit)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        rows = list(pool.map(lambda r: forward_root(r, model, depth_limit), records))
    return FeatureMatrix([r.key for r in records], np.stack(rows),
                         [r.label for r in records])


def cmd_featurize(args: argparse.Namespace) -> int:
    records = read_corpus(args.corpus)
    if args.method == "tree":
        if not args.model:
            raise DocumentError("--model is required for --method tree")
        model, _ = load_model(args.model)
        features = _featurize_tree(records, model, args.depth_limit, args.jobs)
    else:
        if args.model:
            vocab = load_model(args.model)[0].vocab
        elif args.vocab:
            vocab = _load_vocab_file(args.vocab)
        else:
            raise DocumentError("--method bow needs --model or --vocab for the vocabulary")
        features = bow_featurize(records, vocab, args.threshold)
    write_features_csv(args.output, features)
    print(f"wrote {len(features.keys)} feature rows of dimension {features.dim} "
          f"to {args.output}")
    return 0


def cmd_train_classifier(args: argparse.Namespace) -> int:
    opts = _merge_options(args, {**_CLASSIFIER_DEFAULTS, "seed": 0})
    features = read_features_csv(args.features)
    options = _classifier_options(args.classifier, opts)
    model = train_classifier(features, options, opts["seed"])
    save_classifier(args.output, model)
    print(f"wrote {args.classifier} classifier to {args.output}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    features = read_features_csv(args.features)
    clf = load_classifier(args.classifier_file)
    scores = np.asarray(predict_proba(clf, features.values))
    preds = predict(scores)
    report = evaluate_predictions(preds, features.label_array(), scores,
                                  cell=(args.train_name, args.test_name))
    write_report_csv(args.output, [report])
    if args.json_output:
        write_report_json(args.json_output, [report])
    auc_text = "undefined" if report.auc is None else f"{report.auc:.4f}"
    print(f"precision {report.precision:.4f}  recall {report.recall:.4f}  "
          f"f-measure {report.f_measure:.4f}  auc {auc_text}")
    return 1 if report.flags else 0


def cmd_experiment(args: argparse.Namespace) -> int:
    opts = _merge_options(args, {**_TRAIN_DEFAULTS, **_CLASSIFIER_DEFAULTS})
    config = _train_config(opts)
    records = read_corpus(args.corpus)
    descriptor = parse_descriptor(jsonio.read(args.descriptor), str(args.descriptor))
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(descriptor, CvDescriptor):
        options = _classifier_options(descriptor.classifier, opts)
        result = cv_from_folds(cv_feature_folds(records, descriptor.k, config), options)
        reports = [*result.folds, result.average]
        write_report_csv(out_dir / "report.csv", reports)
        write_report_json(out_dir / "report.json", result.folds, result.average)
        avg = result.average
    else:
        assert isinstance(descriptor, PairsDescriptor)
        options = _classifier_options(descriptor.classifier, opts)

        def run_pair(pair):
            return version_pair_run(pair[0], pair[1], records, options, config)

        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(run_pair, descriptor.pairs))
        else:
            reports = [run_pair(p) for p in descriptor.pairs]
        write_report_csv(out_dir / "report.csv", reports)
        from .experiments import average_report

        avg = average_report(reports, cell=("pairs:average", "pairs:average"))
        write_report_json(out_dir / "report.json", reports, avg)
    auc_text = "undefined" if avg.auc is None else f"{avg.auc:.4f}"
    print(f"wrote {len(reports)} report rows to {out_dir / 'report.csv'}")
    print(f"average: precision {avg.precision:.4f}  recall {avg.recall:.4f}  "
          f"f-measure {avg.f_measure:.4f}  auc {auc_text}")
    return 1 if any(r.flags for r in reports) else 0


def cmd_stats(args: argparse.Namespace) -> int:
    records = read_corpus(args.corpus)
    stats = dataset_stats(records)
    print(format_stats_table(stats))
    if args.output:
        import csv

        with Path(args.output).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["project", "versions", "files", "mean_files",
                             "mean_defective", "pct_defective"])
            for s in stats:
                writer.writerow([s.project, s.versions, s.files, s.mean_files,
                                 s.mean_defective, f"{s.pct_defective:.2f}"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treedefect",
        description="Tree-LSTM file representations for defect prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse sources or merge AST documents into a corpus")
    p.add_argument("inputs", nargs="+", help="source dirs/files or AST document files")
    p.add_argument("--output", required=True)
    p.add_argument("--project", default="default")
    p.add_argument("--version", default="1.0")
    p.add_argument("--labels", help="CSV of file_id,label assignments")
    p.add_argument("--skip-bad", action="store_true", dest="skip_bad")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("vocab", help="build a vocabulary file from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--size", type=int, default=10000)
    p.add_argument("--min-count", type=int, default=2, dest="min_count")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("pretrain", help="pretrain the Tree-LSTM on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--log", help="write the per-epoch training log CSV here")
    p.add_argument("--vocab", help="use a prebuilt vocabulary file")
    p.add_argument("--config", help="JSON config file (flags override it)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("featurize", help="write per-file feature vectors")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--model", help="model file (required for --method tree)")
    p.add_argument("--vocab", help="vocabulary file (bow method without a model)")
    p.add_argument("--method", choices=("tree", "bow"), default="tree")
    p.add_argument("--threshold", type=int, default=5, help="bow binarization count")
    p.add_argument("--depth-limit", type=int, default=10000, dest="depth_limit")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train-classifier", help="train a classifier on features")
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--classifier", choices=("logistic", "forest"), default="forest")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file (flags override it)")
    _add_classifier_flags(p)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("evaluate", help="evaluate a classifier on labeled features")
    p.add_argument("--features", required=True)
    p.add_argument("--classifier-file", required=True, dest="classifier_file")
    p.add_argument("--output", required=True, help="report CSV path")
    p.add_argument("--json-output", dest="json_output")
    p.add_argument("--train-name", default="train", dest="train_name")
    p.add_argument("--test-name", default="test", dest="test_name")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a CV or version-pair experiment")
    p.add_argument("--corpus", required=True)
    p.add_argument("--descriptor", required=True, help="experiment descriptor JSON")
    p.add_argument("--output-dir", required=True, dest="output_dir")
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--jobs", type=int, default=1)
    _add_train_flags(p)
    _add_classifier_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("stats", help="print per-project dataset statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", help="also write the table as CSV")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TreeDefectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # contract violations, bugs: report distinctly
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
