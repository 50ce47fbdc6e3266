"""Experiment drivers: within-project cross-validation, version-pair runs,
and dataset statistics.

Every fold or pair builds its vocabulary, Tree-LSTM and classifier from the
training partition alone; held-out files only ever reach a trained model, so
test tokens unseen in training collapse to the unknown index. Fold and pair
seeds are derived from the master seed by name, keeping runs reproducible and
independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import (FeatureMatrix, ForestConfig, featurize_corpus, predict,
                          predict_proba, train_forest, train_logistic)
from .corpus import FileRecord, cell
from .errors import CorpusError, DocumentError
from .evaluation import (ConfusionMatrix, MetricsReport, evaluate_predictions,
                         stratified_k_fold)
from .pretrain import PretrainResult, TrainConfig, pretrain
from .rng import derive_seed

CLASSIFIER_KINDS = ("logistic", "forest")


@dataclass
class ClassifierOptions:
    kind: str = "forest"
    l2: float = 1e-4
    n_trees: int = 100
    max_depth: int = 16
    min_leaf: int = 1
    features_per_split: int | None = None

    def __post_init__(self):
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"classifier kind must be one of {CLASSIFIER_KINDS}, "
                             f"got {self.kind!r}")


def train_classifier(features: FeatureMatrix, options: ClassifierOptions, seed: int):
    if options.kind == "logistic":
        return train_logistic(features, l2=options.l2)
    config = ForestConfig(options.n_trees, options.max_depth, options.min_leaf,
                          options.features_per_split, seed)
    return train_forest(features, config=config)


@dataclass
class FoldFeatures:
    """Feature matrices of one CV fold, with the fold's derived seed and the
    pretraining result that produced them."""

    index: int
    seed: int
    train: FeatureMatrix
    test: FeatureMatrix
    pretrain_result: PretrainResult


@dataclass
class CvResult:
    folds: list[MetricsReport]
    average: MetricsReport
    auc_undefined_folds: int


def cv_feature_folds(records: list[FileRecord], k: int = 10,
                     config: TrainConfig | None = None) -> list[FoldFeatures]:
    """Pretrain per fold on the training partition only and featurize both
    partitions. Shared by both classifier kinds so the expensive pretraining
    happens once per fold."""
    if config is None:
        config = TrainConfig()
    folds = stratified_k_fold(records, k, config.seed)
    out = []
    for i, test_idx in enumerate(folds):
        test_set = set(test_idx)
        train_recs = [r for j, r in enumerate(records) if j not in test_set]
        test_recs = [records[j] for j in test_idx]
        fold_seed = derive_seed(config.seed, "cv", i)
        result = pretrain(train_recs, replace(config, seed=fold_seed))
        out.append(FoldFeatures(
            i, fold_seed,
            featurize_corpus(train_recs, result.model, config.depth_limit),
            featurize_corpus(test_recs, result.model, config.depth_limit),
            result))
    return out


def average_report(reports: list[MetricsReport],
                   cell: tuple[str, str] = ("average", "average")) -> MetricsReport:
    """Macro average: metrics averaged over cells, confusion counts summed.
    Cells with undefined AUC are excluded from the AUC mean and counted in a
    flag."""
    if not reports:
        raise ValueError("cannot average an empty report list")
    matrix = ConfusionMatrix(sum(r.matrix.tp for r in reports),
                             sum(r.matrix.fp for r in reports),
                             sum(r.matrix.fn for r in reports),
                             sum(r.matrix.tn for r in reports))
    aucs = [r.auc for r in reports if r.auc is not None]
    undefined = len(reports) - len(aucs)
    flags = []
    if undefined:
        flags.append(f"auc_undefined_cells={undefined}")
    return MetricsReport(
        cell, matrix,
        float(np.mean([r.precision for r in reports])),
        float(np.mean([r.recall for r in reports])),
        float(np.mean([r.f_measure for r in reports])),
        float(np.mean(aucs)) if aucs else None,
        tuple(flags))


def cv_from_folds(fold_features: list[FoldFeatures],
                  options: ClassifierOptions) -> CvResult:
    reports = []
    for fold in fold_features:
        clf = train_classifier(fold.train, options,
                               derive_seed(fold.seed, "classifier", options.kind))
        scores = np.asarray(predict_proba(clf, fold.test.values))
        preds = predict(scores)
        reports.append(evaluate_predictions(
            preds, fold.test.label_array(), scores,
            cell=(f"fold{fold.index}:train", f"fold{fold.index}:test")))
    avg = average_report(reports, cell=("cv:average", "cv:average"))
    return CvResult(reports, avg, sum(1 for r in reports if r.auc is None))


def within_project_cv(records: list[FileRecord], k: int = 10,
                      options: ClassifierOptions | None = None,
                      config: TrainConfig | None = None) -> CvResult:
    """k-fold stratified CV: per fold, pretrain and featurize on the training
    folds only, train the classifier, evaluate on the held-out fold."""
    if options is None:
        options = ClassifierOptions()
    return cv_from_folds(cv_feature_folds(records, k, config), options)


def version_pair_run(train_cell: tuple[str, str], test_cell: tuple[str, str],
                     records: list[FileRecord],
                     options: ClassifierOptions | None = None,
                     config: TrainConfig | None = None) -> MetricsReport:
    """Train everything on one (project, version) cell, test on another."""
    if options is None:
        options = ClassifierOptions()
    if config is None:
        config = TrainConfig()
    train_recs = cell(records, *train_cell)
    test_recs = cell(records, *test_cell)
    train_name = f"{train_cell[0]}:{train_cell[1]}"
    test_name = f"{test_cell[0]}:{test_cell[1]}"
    if not train_recs:
        raise CorpusError(f"training cell {train_name} is empty")
    if not test_recs:
        raise CorpusError(f"test cell {test_name} is empty")
    if any(r.label is None for r in test_recs):
        raise CorpusError(f"test cell {test_name} has unlabeled files")
    pair_seed = derive_seed(config.seed, "pair", train_name, test_name)
    result = pretrain(train_recs, replace(config, seed=pair_seed))
    train_features = featurize_corpus(train_recs, result.model, config.depth_limit)
    test_features = featurize_corpus(test_recs, result.model, config.depth_limit)
    clf = train_classifier(train_features, options,
                           derive_seed(pair_seed, "classifier", options.kind))
    scores = np.asarray(predict_proba(clf, test_features.values))
    preds = predict(scores)
    return evaluate_predictions(preds, test_features.label_array(), scores,
                                cell=(train_name, test_name))


# --- dataset statistics ---

@dataclass
class ProjectStats:
    project: str
    versions: int
    files: int
    mean_files: int
    mean_defective: int
    pct_defective: float


def dataset_stats(records: list[FileRecord]) -> list[ProjectStats]:
    """Per-project aggregates: version count, total files, mean files and
    mean defective files per version (floor), and the mean of per-version
    defect percentages rounded to two decimals."""
    if not records:
        raise CorpusError("corpus is empty")
    by_cell: dict[tuple[str, str], list[FileRecord]] = {}
    for r in records:
        by_cell.setdefault((r.project, r.version), []).append(r)
    projects = sorted({p for p, _ in by_cell})
    out = []
    for project in projects:
        versions = sorted(v for p, v in by_cell if p == project)
        files = [len(by_cell[(project, v)]) for v in versions]
        defective = [sum(1 for r in by_cell[(project, v)] if r.label == 1)
                     for v in versions]
        rates = [100.0 * d / f for d, f in zip(defective, files)]
        out.append(ProjectStats(
            project, len(versions), sum(files),
            sum(files) // len(versions), sum(defective) // len(versions),
            round(float(np.mean(rates)), 2)))
    return out


def format_stats_table(stats: list[ProjectStats]) -> str:
    headers = ("Project", "#Versions", "#Files", "Mean files",
               "Mean defective", "% defective")
    rows = [[s.project, str(s.versions), str(s.files), str(s.mean_files),
             str(s.mean_defective), f"{s.pct_defective:.2f}"] for s in stats]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)


# --- experiment descriptors ---

@dataclass
class CvDescriptor:
    k: int = 10
    classifier: str = "forest"


@dataclass
class PairsDescriptor:
    pairs: list[tuple[tuple[str, str], tuple[str, str]]] = field(default_factory=list)
    classifier: str = "logistic"


def parse_descriptor(doc, source: str = "descriptor"):
    if not isinstance(doc, dict):
        raise DocumentError(f"{source}: descriptor must be an object")
    kind = doc.get("experiment")
    if kind == "cv":
        k = doc.get("k", 10)
        if not isinstance(k, int) or k < 2:
            raise DocumentError(f"{source}: 'k' must be an integer >= 2")
        classifier = doc.get("classifier", "forest")
        if classifier not in CLASSIFIER_KINDS:
            raise DocumentError(f"{source}: unknown classifier {classifier!r}")
        return CvDescriptor(k, classifier)
    if kind == "version-pairs":
        raw = doc.get("pairs")
        if not isinstance(raw, list) or not raw:
            raise DocumentError(f"{source}: 'pairs' must be a non-empty list")
        pairs = []
        for i, entry in enumerate(raw):
            where = f"{source}.pairs[{i}]"
            if not isinstance(entry, dict):
                raise DocumentError(f"{where}: pair must be an object")
            sides = []
            for side in ("train", "test"):
                spec = entry.get(side)
                if (not isinstance(spec, dict)
                        or not isinstance(spec.get("project"), str)
                        or not isinstance(spec.get("version"), str)):
                    raise DocumentError(
                        f"{where}: {side!r} needs string fields project and version")
                sides.append((spec["project"], spec["version"]))
            pairs.append((sides[0], sides[1]))
        classifier = doc.get("classifier", "logistic")
        if classifier not in CLASSIFIER_KINDS:
            raise DocumentError(f"{source}: unknown classifier {classifier!r}")
        return PairsDescriptor(pairs, classifier)
    raise DocumentError(f"{source}: 'experiment' must be 'cv' or 'version-pairs'")
