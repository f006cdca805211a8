"""Signal-level k-fold cross-validation, confusion matrices, report emission."""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .audio_io import DataError, LabeledDataset, load_wav
from .classify import ClassifierSpec, classify_signal, fit_classifier
from .features import (ExtractionConfig, extract_track, select_high_energy,
                       select_periodic)

REPORT_VERSION = 1


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint index folds covering the whole dataset."""

    k: int
    seed: int
    folds: tuple


def kfold_split(dataset: LabeledDataset, k: int, seed: int) -> FoldPlan:
    """Stratified split: each class is shuffled once and dealt round robin.

    Splitting happens at signal granularity; frames of one recording never
    straddle the train/test boundary.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    counts = dataset.class_counts()
    small = [lab for lab in dataset.label_set if counts[lab] < k]
    if small:
        raise DataError(f"classes smaller than k={k}: {', '.join(small)}")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for lab in dataset.label_set:
        idxs = np.array([i for i, e in enumerate(dataset.entries) if e.label == lab])
        rng.shuffle(idxs)
        for j, i in enumerate(idxs):
            folds[j % k].append(int(i))
    return FoldPlan(k, seed, tuple(tuple(f) for f in folds))


@dataclass(eq=False)
class ConfusionMatrix:
    """Integer count grid, rows = actual class, columns = predicted class."""

    labels: tuple
    counts: np.ndarray

    @classmethod
    def zeros(cls, labels):
        n = len(labels)
        return cls(tuple(labels), np.zeros((n, n), dtype=int))

    def add(self, actual: str, predicted: str):
        self.counts[self.labels.index(actual), self.labels.index(predicted)] += 1

    def total(self) -> int:
        return int(self.counts.sum())


def confusion_accuracy(matrix: ConfusionMatrix) -> float:
    """Percentage of the total count sitting on the diagonal."""
    total = matrix.total()
    if total == 0:
        raise ValueError("empty confusion matrix")
    return 100.0 * float(np.trace(matrix.counts)) / total


@dataclass(eq=False)
class EvaluationReport:
    classifier: str
    config: dict
    spec: dict
    labels: tuple
    cv_folds: int
    seed: int
    fold_accuracies: list
    mean: float
    std: float
    confusion: ConfusionMatrix
    frames_total: int
    frames_periodic: int
    frames_selected: int
    unclassified: int
    version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "config": dict(self.config),
            "spec": dict(self.spec),
            "fold_accuracies": list(self.fold_accuracies),
            "mean": self.mean,
            "std": self.std,
            "confusion": [int(v) for v in self.confusion.counts.reshape(-1)],
            "labels": list(self.labels),
            "seed": self.seed,
            "cv_folds": self.cv_folds,
            "frames_total": self.frames_total,
            "frames_periodic": self.frames_periodic,
            "frames_selected": self.frames_selected,
            "unclassified": self.unclassified,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, doc: dict):
        labels = tuple(doc["labels"])
        n = len(labels)
        counts = np.array(doc["confusion"], dtype=int).reshape(n, n)
        return cls(classifier=doc["classifier"], config=doc["config"],
                   spec=doc["spec"], labels=labels, cv_folds=doc["cv_folds"],
                   seed=doc["seed"], fold_accuracies=list(doc["fold_accuracies"]),
                   mean=doc["mean"], std=doc["std"],
                   confusion=ConfusionMatrix(labels, counts),
                   frames_total=doc["frames_total"],
                   frames_periodic=doc["frames_periodic"],
                   frames_selected=doc["frames_selected"],
                   unclassified=doc["unclassified"], version=doc["version"])


def extract_dataset(dataset: LabeledDataset, config: ExtractionConfig):
    """One feature track per manifest entry; failures name the offending file."""
    tracks = []
    for e in dataset.entries:
        try:
            tracks.append(extract_track(load_wav(e.path), config))
        except DataError:
            raise
        except Exception as exc:
            raise DataError(f"{e.path}: {exc}") from exc
    return tracks


def frame_counts(tracks, config: ExtractionConfig):
    """(total, periodic, high-energy) frame counts over a list of tracks."""
    total = sum(len(t) for t in tracks)
    periodic_tracks = [select_periodic(t) for t in tracks]
    periodic = sum(len(t) for t in periodic_tracks)
    selected = sum(len(select_high_energy(t, config.alpha, config.zeta))
                   for t in periodic_tracks)
    return total, periodic, selected


def training_vectors(tracks, dataset: LabeledDataset, indices, config: ExtractionConfig,
                     high_energy_only: bool):
    """Stack the selected frame vectors of the given signals, labels per frame."""
    label_index = {lab: i for i, lab in enumerate(dataset.label_set)}
    xs, ys = [], []
    for i in indices:
        t = select_periodic(tracks[i])
        if high_energy_only:
            t = select_high_energy(t, config.alpha, config.zeta)
        if len(t) == 0:
            continue
        xs.append(t.vectors())
        ys.append(np.full(len(t), label_index[dataset.entries[i].label], dtype=int))
    if not xs:
        raise DataError("no training frames survive selection")
    return np.concatenate(xs), np.concatenate(ys)


def run_cv(dataset: LabeledDataset, config: ExtractionConfig, spec: ClassifierSpec,
           plan: FoldPlan, tracks=None, fitter=None) -> EvaluationReport:
    """Rotate each fold out as the test set, fit on the rest, vote per signal.

    The aggregate confusion matrix counts every classified held-out signal
    across all folds; unclassifiable signals (no periodic frames) count as
    errors in the accuracy and are reported separately.
    """
    if tracks is None:
        tracks = extract_dataset(dataset, config)
    total, periodic, selected = frame_counts(tracks, config)
    if fitter is None:
        fitter = lambda X, y: fit_classifier(spec, X, y, dataset.label_set)

    confusion = ConfusionMatrix.zeros(dataset.label_set)
    accuracies = []
    unclassified = 0
    for fold in plan.folds:
        held_out = set(fold)
        train_idx = [i for i in range(len(dataset)) if i not in held_out]
        X, y = training_vectors(tracks, dataset, train_idx, config,
                                spec.high_energy_only)
        model = fitter(X, y)
        correct = 0
        for i in fold:
            pred = classify_signal(model, tracks[i], config)
            actual = dataset.entries[i].label
            if pred.label is None:
                unclassified += 1
                continue
            confusion.add(actual, pred.label)
            correct += int(pred.label == actual)
        accuracies.append(100.0 * correct / len(fold))

    mean = float(np.mean(accuracies))
    std = float(np.std(accuracies, ddof=1)) if len(accuracies) > 1 else 0.0
    return EvaluationReport(
        classifier=spec.display_name(), config=asdict(config), spec=asdict(spec),
        labels=dataset.label_set, cv_folds=plan.k, seed=plan.seed,
        fold_accuracies=accuracies, mean=mean, std=std, confusion=confusion,
        frames_total=total, frames_periodic=periodic, frames_selected=selected,
        unclassified=unclassified)


def baseline_specs(base: ClassifierSpec):
    """The comparison ladder: least squares, kNN x2, LDA, LDA-HE, QDA, QDA-HE."""
    from dataclasses import replace
    return [
        ("least_squares", replace(base, kind="least_squares", high_energy_only=False)),
        ("knn_cosine", replace(base, kind="knn", knn_metric="cosine", high_energy_only=False)),
        ("knn_euclidean", replace(base, kind="knn", knn_metric="euclidean", high_energy_only=False)),
        ("lda", replace(base, kind="lda", high_energy_only=False)),
        ("lda_high_energy", replace(base, kind="lda", high_energy_only=True)),
        ("qda", replace(base, kind="qda", high_energy_only=False)),
        ("qda_high_energy", replace(base, kind="qda", high_energy_only=True)),
    ]


def run_comparison(dataset: LabeledDataset, config: ExtractionConfig,
                   base_spec: ClassifierSpec, plan: FoldPlan, tracks=None):
    """Run every baseline on the same folds; returns [(key, report), ...]."""
    if tracks is None:
        tracks = extract_dataset(dataset, config)
    return [(key, run_cv(dataset, config, spec, plan, tracks=tracks))
            for key, spec in baseline_specs(base_spec)]


def format_accuracy(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def _confusion_grid(matrix: ConfusionMatrix) -> str:
    width = max(5, max(len(lab) for lab in matrix.labels))
    head = " " * (width + 2) + " ".join(f"{lab:>{width}}" for lab in matrix.labels)
    lines = [head]
    for i, lab in enumerate(matrix.labels):
        row = " ".join(f"{int(v):>{width}d}" for v in matrix.counts[i])
        lines.append(f"  {lab:<{width}}" + row)
    return "\n".join(lines)


def format_report_text(report: EvaluationReport) -> str:
    lines = [
        f"classifier: {report.classifier}",
        f"folds: {report.cv_folds}  seed: {report.seed}",
        "fold accuracies (%): " + " ".join(f"{a:.2f}" for a in report.fold_accuracies),
        f"accuracy: {format_accuracy(report.mean, report.std)}",
        f"frames: {report.frames_total} total, {report.frames_periodic} periodic, "
        f"{report.frames_selected} high-energy",
    ]
    if report.unclassified:
        lines.append(f"unclassified signals: {report.unclassified}")
    lines.append("")
    lines.append("confusion (rows actual, columns predicted):")
    lines.append(_confusion_grid(report.confusion))
    return "\n".join(lines) + "\n"


def format_report_csv(report: EvaluationReport) -> str:
    lines = ["fold,accuracy_pct"]
    lines += [f"{i + 1},{a!r}" for i, a in enumerate(report.fold_accuracies)]
    return "\n".join(lines) + "\n"


def format_report_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


_REPORT_FORMATS = {
    "text": format_report_text,
    "csv": format_report_csv,
    "json": format_report_json,
}


def emit_report(report: EvaluationReport, fmt: str, path=None) -> str:
    """Render the report; writes to path when given, always returns the text."""
    try:
        rendered = _REPORT_FORMATS[fmt](report)
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}") from None
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    return rendered


def format_comparison_text(results) -> str:
    width = max(len(r.classifier) for _, r in results) + 2
    lines = [f"{'classifier':<{width}}accuracy (%)"]
    for _, rep in results:
        lines.append(f"{rep.classifier:<{width}}{format_accuracy(rep.mean, rep.std)}")
    return "\n".join(lines) + "\n"


def format_comparison_csv(results) -> str:
    lines = ["classifier,mean_pct,std_pct"]
    lines += [f"{key},{rep.mean!r},{rep.std!r}" for key, rep in results]
    return "\n".join(lines) + "\n"


def format_comparison_json(results) -> str:
    doc = {"version": REPORT_VERSION,
           "results": [{"key": key, **rep.to_dict()} for key, rep in results]}
    return json.dumps(doc, indent=2) + "\n"


_COMPARISON_FORMATS = {
    "text": format_comparison_text,
    "csv": format_comparison_csv,
    "json": format_comparison_json,
}


def emit_comparison(results, fmt: str, path=None) -> str:
    try:
        rendered = _COMPARISON_FORMATS[fmt](results)
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}") from None
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    return rendered
