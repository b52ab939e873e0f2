"""Classification metrics and leaderboard aggregation.

Per-class precision/recall/F1 come straight from the confusion matrix with
zero denominators mapped to 0; the headline F1 is the unweighted (macro)
mean over classes, which is the robust signal on imbalanced test sets. A
weighted variant is available behind a flag. Run records aggregate into
two leaderboard flavors: rank by a metric averaged over datasets, or rank
by the average of per-dataset ranks.
"""

from __future__ import annotations

import csv
import json
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidArgumentError, ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix; rows are true classes, columns predictions."""

    labels: tuple[str, ...]
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if arr.shape != (k, k):
            raise DimensionError(f"counts must be {k}x{k}, got {arr.shape}")
        if np.any(arr < 0):
            raise InvalidArgumentError("counts must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: tuple[ClassMetrics, ...]
    weighted_f1: float = 0.0


def confusion_from_pairs(pairs, labels) -> ConfusionMatrix:
    """Tally (true, predicted) pairs over an ordered label list."""
    labels = tuple(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in pairs:
        if t not in index:
            raise ValidationError(f"unknown true label {t!r}")
        if p not in index:
            raise ValidationError(f"unknown predicted label {p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(labels, counts)


def compute_report(cm: ConfusionMatrix) -> MetricReport:
    """Accuracy plus per-class and macro precision/recall/F1.

    precision_c = counts[c][c] / column sum, recall_c = counts[c][c] / row
    sum, f1_c their harmonic mean; each is 0 whenever its denominator is 0.
    Macro values are plain means over classes, the weighted F1 weights by
    class support.
    """
    total = cm.total
    if total == 0:
        raise InvalidArgumentError("confusion matrix has no samples")
    counts = cm.counts
    per_class = []
    for i, label in enumerate(cm.labels):
        tp = int(counts[i, i])
        col = int(counts[:, i].sum())
        row = int(counts[i, :].sum())
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(ClassMetrics(label, precision, recall, f1, row))
    k = len(per_class)
    accuracy = float(np.trace(counts)) / total
    weighted = sum(c.f1 * c.support for c in per_class) / total
    return MetricReport(
        accuracy=accuracy,
        macro_precision=sum(c.precision for c in per_class) / k,
        macro_recall=sum(c.recall for c in per_class) / k,
        macro_f1=sum(c.f1 for c in per_class) / k,
        per_class=tuple(per_class),
        weighted_f1=weighted,
    )


# --------------------------------------------------------------------------
# run records and aggregation


RUN_CSV_COLUMNS = (
    "model",
    "dataset",
    "acc",
    "f1",
    "acc_sd",
    "f1_sd",
    "acc_ft",
    "f1_ft",
    "acc_sd_ft",
    "f1_sd_ft",
    "best_epoch",
    "best_epoch_ft",
)


@dataclass(frozen=True)
class RunRecord:
    """One benchmark row: a model evaluated on a dataset in one phase."""

    model: str
    dataset: str
    phase: str  # "tl" | "ft"
    accuracy: float
    macro_f1: float
    best_epoch: float

    def __post_init__(self):
        if self.phase not in ("tl", "ft"):
            raise InvalidArgumentError(f"phase must be tl or ft, got {self.phase!r}")
        if self.best_epoch < 1:
            raise InvalidArgumentError("best_epoch must be >= 1")

    @classmethod
    def from_report(cls, model: str, dataset: str, phase: str,
                    report: MetricReport, best_epoch: float) -> "RunRecord":
        return cls(model, dataset, phase, report.accuracy, report.macro_f1,
                   best_epoch)


def read_run_csv(path) -> list[RunRecord]:
    """Load the benchmark CSV layout into one tl and one ft record per row."""
    records = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for ln, row in enumerate(csv.DictReader(fh), start=2):
            try:
                records.append(
                    RunRecord(row["model"], row["dataset"], "tl",
                              float(row["acc"]), float(row["f1"]),
                              float(row["best_epoch"]))
                )
                records.append(
                    RunRecord(row["model"], row["dataset"], "ft",
                              float(row["acc_ft"]), float(row["f1_ft"]),
                              float(row["best_epoch_ft"]))
                )
            except (KeyError, ValueError) as exc:
                raise ValidationError(f"{path}:{ln}: bad run row: {exc}") from exc
    return records


def write_run_jsonl(records, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.__dict__, sort_keys=True) + "\n")


def read_run_jsonl(path) -> list[RunRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord(**json.loads(line)))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{ln}: bad run row: {exc}") from exc
    return records


def aggregate_mean(runs, group_by: str = "model"):
    """Mean accuracy, F1 and best epoch per group.

    ``group_by`` is "model" or "dataset". Returns a list of
    (key, {"accuracy": .., "macro_f1": .., "best_epoch": ..}) sorted by key.
    """
    runs = list(runs)
    if not runs:
        raise InvalidArgumentError("no runs to aggregate")
    if group_by not in ("model", "dataset"):
        raise InvalidArgumentError("group_by must be model or dataset")
    groups: dict[str, list[RunRecord]] = defaultdict(list)
    for r in runs:
        groups[getattr(r, group_by)].append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        out.append(
            (
                key,
                {
                    "accuracy": statistics.fmean(r.accuracy for r in rs),
                    "macro_f1": statistics.fmean(r.macro_f1 for r in rs),
                    "best_epoch": statistics.fmean(r.best_epoch for r in rs),
                },
            )
        )
    return out


# --------------------------------------------------------------------------
# leaderboards


@dataclass(frozen=True)
class RankingRow:
    name: str
    score: float
    rank: float


@dataclass(frozen=True)
class RankingTable:
    method: str  # "by_avg_metric" | "by_avg_rank"
    rows: tuple[RankingRow, ...]

    def order(self) -> list[str]:
        return [r.name for r in self.rows]

    def to_text(self) -> str:
        width = max((len(r.name) for r in self.rows), default=4)
        lines = [f"{'rank':>6}  {'name':<{width}}  score"]
        for r in self.rows:
            rank = f"{r.rank:g}"
            lines.append(f"{rank:>6}  {r.name:<{width}}  {r.score:.4f}")
        return "\n".join(lines)


def _fractional_ranks(scores: list[float]) -> list[float]:
    """Ranks 1..n for already-sorted scores; ties share the mean position."""
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[j + 1] == scores[i]:
            j += 1
        mean_rank = (i + 1 + j + 1) / 2
        for k in range(i, j + 1):
            ranks[k] = mean_rank
        i = j + 1
    return ranks


def rank_by_value(entries, descending: bool = True) -> RankingTable:
    """Order (name, score) entries by score; ties get fractional ranks.

    The sort is stable, so tied entries keep their input order.
    """
    entries = list(entries)
    for name, score in entries:
        if not np.isfinite(score):
            raise InvalidArgumentError(f"score for {name!r} is not finite")
    ordered = sorted(entries, key=lambda e: -e[1] if descending else e[1])
    ranks = _fractional_ranks([e[1] for e in ordered])
    rows = tuple(
        RankingRow(name, float(score), rank)
        for (name, score), rank in zip(ordered, ranks)
    )
    return RankingTable("by_avg_metric", rows)


def average_rank(per_dataset_ranks: dict) -> RankingTable:
    """Average each model's per-dataset ranks and order ascending by that mean."""
    lengths = {len(v) for v in per_dataset_ranks.values()}
    if len(lengths) > 1:
        raise ValidationError(
            f"every model needs the same number of ranks, got lengths {sorted(lengths)}"
        )
    means = [
        (model, statistics.fmean(ranks))
        for model, ranks in sorted(per_dataset_ranks.items())
    ]
    table = rank_by_value(means, descending=False)
    return RankingTable("by_avg_rank", table.rows)


def ranks_per_dataset(runs, metric: str = "accuracy", phase: str = "ft") -> dict:
    """Build the per-dataset rank lists that feed :func:`average_rank`."""
    by_dataset: dict[str, list[RunRecord]] = defaultdict(list)
    for r in runs:
        if r.phase == phase:
            by_dataset[r.dataset].append(r)
    out: dict[str, list[float]] = defaultdict(list)
    for ds in sorted(by_dataset):
        table = rank_by_value(
            [(r.model, getattr(r, metric)) for r in by_dataset[ds]]
        )
        for row in table.rows:
            out[row.name].append(row.rank)
    return dict(out)


def write_ranking_csv(table: RankingTable, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "name", "score"])
        for row in table.rows:
            writer.writerow([f"{row.rank:g}", row.name, f"{row.score:.6f}"])
