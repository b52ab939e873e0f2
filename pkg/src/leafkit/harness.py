"""Two-phase training control loop over an abstract trainer.

The loop itself is pure control logic: freeze the feature extractor, train
with early stopping while checkpointing the best epoch, restore that
checkpoint, evaluate train/val/test, then unfreeze and do it all again.
Anything that actually trains lives behind :class:`TrainerContract`; this
repository only ships the scripted mock used for testing the loop, real
trainers are adapters written elsewhere.
"""

from __future__ import annotations

import csv
import json
import statistics
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidArgumentError, LeafkitError
from .metrics import MetricReport

MONITORS = {"val_loss": "min", "val_accuracy": "max"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of one experiment.

    ``patience`` counts non-improving epochs before stopping; ``None``
    disables early stopping entirely, while 0 stops at the first epoch
    that fails to improve. ``monitor`` picks the tracked metric:
    val_loss is minimized, val_accuracy maximized.
    """

    tl_epochs: int = 200
    ft_epochs: int = 200
    patience: int | None = 50
    monitor: str = "val_loss"
    frozen_first: bool = True

    def __post_init__(self):
        if self.tl_epochs < 1 or self.ft_epochs < 1:
            raise InvalidArgumentError("epoch budgets must be >= 1")
        if self.patience is not None and self.patience < 0:
            raise InvalidArgumentError("patience must be >= 0 (or None to disable)")
        if self.monitor not in MONITORS:
            raise InvalidArgumentError(
                f"monitor must be one of {sorted(MONITORS)}, got {self.monitor!r}"
            )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**raw)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float

    def monitored(self, monitor: str) -> float:
        return self.val_loss if monitor == "val_loss" else self.val_acc


class TrainerError(LeafkitError):
    """A trainer failed mid-epoch."""


class ExperimentAborted(LeafkitError):
    """Raised when a trainer fails; carries the log of completed epochs."""

    def __init__(self, message: str, log: "ExperimentLog"):
        super().__init__(message)
        self.log = log


class TrainerContract(ABC):
    """What a conforming trainer must provide.

    The harness owns call order; the trainer owns optimizer, batch sizes
    and every other training-internal concern. ``restore(snapshot())``
    must round-trip trainer state, and a deterministic trainer repeats its
    metric sequence exactly.
    """

    @abstractmethod
    def set_frozen(self, flag: bool) -> None:
        """Freeze or unfreeze the feature extractor; the classifier head
        stays trainable either way."""

    @abstractmethod
    def train_one_epoch(self) -> EpochMetrics:
        ...

    @abstractmethod
    def snapshot(self):
        """Return an opaque token for the current trainer state."""

    @abstractmethod
    def restore(self, token) -> None:
        ...

    @abstractmethod
    def evaluate(self, split: str) -> MetricReport:
        ...


# --------------------------------------------------------------------------
# early stopping and best-epoch selection


def early_stop_step(history, patience: int, mode: str = "min") -> bool:
    """True when training should stop now.

    ``history`` holds the monitored value of every epoch so far. Training
    stops once the number of epochs since the (earliest) best value
    reaches ``patience``; improvement is strict, equal values do not
    reset the counter. Patience 0 therefore stops at the first epoch
    that fails to improve.
    """
    history = list(history)
    if not history:
        raise InvalidArgumentError("history must not be empty")
    if patience < 0:
        raise InvalidArgumentError("patience must be >= 0")
    if mode not in ("min", "max"):
        raise InvalidArgumentError("mode must be min or max")
    best = min(history) if mode == "min" else max(history)
    best_epoch = history.index(best) + 1
    since_best = len(history) - best_epoch
    return since_best >= 1 and since_best >= patience


def select_best_epoch(log, monitor: str = "val_loss") -> int:
    """Epoch whose monitored value is best; the earliest such epoch on ties."""
    log = list(log)
    if not log:
        raise InvalidArgumentError("epoch log must not be empty")
    values = [em.monitored(monitor) for em in log]
    best = min(values) if MONITORS[monitor] == "min" else max(values)
    return log[values.index(best)].epoch


# --------------------------------------------------------------------------
# experiment loop


@dataclass
class PhaseLog:
    name: str  # "tl" | "ft"
    frozen: bool
    epochs: list[EpochMetrics] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    reports: dict = field(default_factory=dict)  # split -> MetricReport


@dataclass
class ExperimentLog:
    phases: list[PhaseLog] = field(default_factory=list)

    def phase(self, name: str) -> PhaseLog:
        for ph in self.phases:
            if ph.name == name:
                return ph
        raise KeyError(name)


def _improved(current: float, best: float | None, mode: str) -> bool:
    if best is None:
        return True
    return current < best if mode == "min" else current > best


def run_experiment(trainer: TrainerContract, cfg: ExperimentConfig) -> ExperimentLog:
    """Run the frozen phase then the unfrozen phase and log everything.

    Each phase trains up to its epoch budget (earlier if early stopping
    fires), restores the snapshot of the best epoch, then evaluates the
    train, val and test splits. Epoch counters restart at 1 per phase.
    """
    mode = MONITORS[cfg.monitor]
    log = ExperimentLog()
    plan = (
        ("tl", cfg.frozen_first, cfg.tl_epochs),
        ("ft", False, cfg.ft_epochs),
    )
    for name, frozen, budget in plan:
        phase = PhaseLog(name=name, frozen=frozen)
        log.phases.append(phase)
        trainer.set_frozen(frozen)
        best_value: float | None = None
        best_token = None
        monitored: list[float] = []
        for epoch in range(1, budget + 1):
            try:
                em = trainer.train_one_epoch()
            except Exception as exc:
                raise ExperimentAborted(
                    f"trainer failed in {name} epoch {epoch}: {exc}", log
                ) from exc
            em = EpochMetrics(epoch, em.train_loss, em.train_acc,
                              em.val_loss, em.val_acc)
            phase.epochs.append(em)
            value = em.monitored(cfg.monitor)
            monitored.append(value)
            if _improved(value, best_value, mode):
                best_value = value
                best_token = trainer.snapshot()
            if cfg.patience is not None and early_stop_step(
                monitored, cfg.patience, mode
            ):
                phase.stopped_early = True
                break
        phase.best_epoch = select_best_epoch(phase.epochs, cfg.monitor)
        trainer.restore(best_token)
        for split in ("train", "val", "test"):
            phase.reports[split] = trainer.evaluate(split)
    return log


# --------------------------------------------------------------------------
# scripted mock trainer


class ScriptedTrainer(TrainerContract):
    """Replays fixed per-epoch metrics and records every call it receives.

    The script is either a flat list of (train_loss, train_acc, val_loss,
    val_acc) quadruples consumed across both phases, or a mapping with
    "tl" and "ft" lists consumed per phase. Snapshot tokens are
    (phase_label, epoch) tuples, which makes restore targets easy to
    assert in tests.
    """

    def __init__(self, script):
        if isinstance(script, dict):
            self._per_phase = {k: [tuple(q) for q in v] for k, v in script.items()}
            self._flat = None
        else:
            self._per_phase = None
            self._flat = [tuple(q) for q in script]
        self._cursor = 0
        self._phase_label = "start"
        self._phase_epoch = 0
        self._restored = None
        self.trace: list[tuple] = []

    @classmethod
    def from_json(cls, path) -> "ScriptedTrainer":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def set_frozen(self, flag: bool) -> None:
        self.trace.append(("set_frozen", flag))
        self._phase_label = "frozen" if flag else "unfrozen"
        self._phase_epoch = 0
        if self._per_phase is not None:
            self._cursor = 0

    def _next_quad(self):
        if self._per_phase is not None:
            key = "tl" if self._phase_label == "frozen" else "ft"
            seq = self._per_phase.get(key, [])
        else:
            seq = self._flat
        if self._cursor >= len(seq):
            raise TrainerError(f"script exhausted after {self._cursor} epochs")
        quad = seq[self._cursor]
        self._cursor += 1
        return quad

    def train_one_epoch(self) -> EpochMetrics:
        quad = self._next_quad()
        self._phase_epoch += 1
        self.trace.append(("train_one_epoch", self._phase_label, self._phase_epoch))
        return EpochMetrics(self._phase_epoch, *quad)

    def snapshot(self):
        token = (self._phase_label, self._phase_epoch)
        self.trace.append(("snapshot", token))
        return token

    def restore(self, token) -> None:
        self.trace.append(("restore", token))
        self._restored = token

    def evaluate(self, split: str) -> MetricReport:
        self.trace.append(("evaluate", split, self._restored))
        # mock report keyed off the restored epoch so tests can see which
        # state was evaluated
        if self._restored is None:
            raise TrainerError("evaluate before any restore")
        label, epoch = self._restored
        acc = min(1.0, 0.5 + epoch / 1000.0)
        return MetricReport(
            accuracy=acc,
            macro_precision=acc,
            macro_recall=acc,
            macro_f1=acc,
            per_class=(),
        )


def collapse_trace(trace) -> list[str]:
    """Reduce a recorded call trace to its high-level line order.

    Snapshot calls are bookkeeping, consecutive training epochs collapse
    into a single "train", and freeze/unfreeze keep their direction.
    """
    out: list[str] = []
    for event in trace:
        kind = event[0]
        if kind == "snapshot":
            continue
        if kind == "set_frozen":
            out.append("freeze" if event[1] else "unfreeze")
        elif kind == "train_one_epoch":
            if not out or out[-1] != "train":
                out.append("train")
        elif kind == "restore":
            out.append("restore")
        elif kind == "evaluate":
            out.append("evaluate")
    return out


ALGORITHM_LINE_ORDER = [
    "freeze", "train", "restore", "evaluate", "evaluate", "evaluate",
    "unfreeze", "train", "restore", "evaluate", "evaluate", "evaluate",
]


# --------------------------------------------------------------------------
# result emission


RESULT_COLUMNS = (
    "model", "dataset", "acc", "f1", "acc_sd", "f1_sd",
    "acc_ft", "f1_ft", "acc_sd_ft", "f1_sd_ft",
    "best_epoch", "best_epoch_ft",
)


def _phase_stats(logs: list[ExperimentLog], phase: str):
    accs = [lg.phase(phase).reports["test"].accuracy for lg in logs]
    f1s = [lg.phase(phase).reports["test"].macro_f1 for lg in logs]
    bests = [lg.phase(phase).best_epoch for lg in logs]
    return {
        "acc": statistics.fmean(accs),
        "f1": statistics.fmean(f1s),
        "acc_sd": statistics.pstdev(accs),
        "f1_sd": statistics.pstdev(f1s),
        "best_epoch": statistics.fmean(bests),
    }


def emit_results(logs, csv_path, jsonl_path=None) -> list[dict]:
    """Write benchmark rows for (model, dataset, ExperimentLog) triples.

    Repeated runs of the same (model, dataset) pair aggregate into one row
    with means and population standard deviations. Returns the row dicts.
    """
    grouped: dict[tuple[str, str], list[ExperimentLog]] = {}
    order: list[tuple[str, str]] = []
    for model, dataset, log in logs:
        key = (model, dataset)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(log)

    rows = []
    for model, dataset in order:
        runs = grouped[(model, dataset)]
        tl = _phase_stats(runs, "tl")
        ft = _phase_stats(runs, "ft")
        rows.append(
            {
                "model": model,
                "dataset": dataset,
                "acc": tl["acc"],
                "f1": tl["f1"],
                "acc_sd": tl["acc_sd"],
                "f1_sd": tl["f1_sd"],
                "acc_ft": ft["acc"],
                "f1_ft": ft["f1"],
                "acc_sd_ft": ft["acc_sd"],
                "f1_sd_ft": ft["f1_sd"],
                "best_epoch": tl["best_epoch"],
                "best_epoch_ft": ft["best_epoch"],
            }
        )

    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with csv_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULT_COLUMNS)
            for row in rows:
                writer.writerow(
                    [row["model"], row["dataset"]]
                    + [f"{row[c]:.5f}" for c in RESULT_COLUMNS[2:10]]
                    + [f"{row[c]:g}" for c in ("best_epoch", "best_epoch_ft")]
                )
    except OSError as exc:
        raise LeafkitError(f"cannot write results to {csv_path}: {exc}") from exc

    if jsonl_path is not None:
        with Path(jsonl_path).open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return rows
