"""Multi-source dataset construction over manifest records.

A manifest is the single source of truth for every image: identity,
provenance, class, split assignment and augmentation lineage. The
operations here merge per-source file listings into one manifest, clean up
and merge classes, assign stratified splits, and balance every training
class to a fixed size by sampling from an augmentation pool. All of it is
pure record bookkeeping; pixels are only touched when a plan is executed.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .augment.plan import AugmentationMode, ops_for_mode, stream_seed
from .errors import InvalidArgumentError, ValidationError

SPLITS = ("unassigned", "train", "val", "test")
DELETE_REASONS = ("too_small", "complex", "multi_disease", "other")


@dataclass(frozen=True)
class Lineage:
    parent: str
    op: str
    seed: int

    def to_dict(self) -> dict:
        return {"parent": self.parent, "op": self.op, "seed": self.seed}


@dataclass(frozen=True)
class ImageRecord:
    id: str
    source_dataset: str
    original_class: str
    final_class: str
    split: str = "unassigned"
    path: str = ""
    lineage: Lineage | None = None
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise InvalidArgumentError(f"unknown split {self.split!r}")
        if self.lineage is not None and self.split == "test":
            raise ValidationError(
                f"augmented record {self.id!r} must not land in the test split"
            )

    @property
    def is_augmented(self) -> bool:
        return self.lineage is not None

    def to_dict(self) -> dict:
        row = {
            "id": self.id,
            "source_dataset": self.source_dataset,
            "original_class": self.original_class,
            "final_class": self.final_class,
            "split": self.split,
            "path": self.path,
        }
        if self.lineage is not None:
            row["lineage"] = self.lineage.to_dict()
        if self.width is not None:
            row["width"] = self.width
        if self.height is not None:
            row["height"] = self.height
        return row

    @classmethod
    def from_dict(cls, row: dict) -> "ImageRecord":
        lineage = None
        if row.get("lineage"):
            li = row["lineage"]
            lineage = Lineage(li["parent"], li["op"], int(li["seed"]))
        return cls(
            id=row["id"],
            source_dataset=row["source_dataset"],
            original_class=row["original_class"],
            final_class=row["final_class"],
            split=row.get("split", "unassigned"),
            path=row.get("path", ""),
            lineage=lineage,
            width=row.get("width"),
            height=row.get("height"),
        )


@dataclass
class Manifest:
    records: list[ImageRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValidationError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def class_counts(self, split: str | None = None) -> Counter:
        return Counter(
            r.final_class
            for r in self.records
            if split is None or r.split == split
        )

    def classes(self) -> list[str]:
        return sorted({r.final_class for r in self.records})


# --------------------------------------------------------------------------
# JSON Lines IO


def write_manifest(m: Manifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        if m.metadata:
            fh.write(json.dumps({"_meta": m.metadata}, sort_keys=True) + "\n")
        for rec in m.records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_manifest(path) -> Manifest:
    path = Path(path)
    records: list[ImageRecord] = []
    metadata: dict = {}
    with path.open("r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{ln}: bad JSON: {exc}") from exc
            if "_meta" in row:
                metadata = row["_meta"]
                continue
            try:
                records.append(ImageRecord.from_dict(row))
            except KeyError as exc:
                raise ValidationError(f"{path}:{ln}: missing key {exc}") from exc
    return Manifest(records, metadata)


# --------------------------------------------------------------------------
# class rules


@dataclass(frozen=True)
class ClassRule:
    kind: str  # "delete" | "merge"
    class_name: str = ""
    reason: str = ""
    class_a: str = ""
    class_b: str = ""
    into: str = ""

    def __post_init__(self):
        if self.kind == "delete":
            if not self.class_name:
                raise InvalidArgumentError("delete rule needs a class name")
            if self.reason not in DELETE_REASONS:
                raise InvalidArgumentError(
                    f"delete reason must be one of {DELETE_REASONS}, got {self.reason!r}"
                )
        elif self.kind == "merge":
            if not (self.class_a and self.class_b and self.into):
                raise InvalidArgumentError("merge rule needs class_a, class_b and into")
        else:
            raise InvalidArgumentError(f"unknown rule kind {self.kind!r}")

    @classmethod
    def delete(cls, class_name: str, reason: str) -> "ClassRule":
        return cls("delete", class_name=class_name, reason=reason)

    @classmethod
    def merge(cls, class_a: str, class_b: str, into: str) -> "ClassRule":
        return cls("merge", class_a=class_a, class_b=class_b, into=into)


def load_class_rules(path) -> list[ClassRule]:
    """Read a JSON list of {kind, ...} rule objects."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    rules = []
    for i, row in enumerate(raw):
        kind = row.get("kind")
        if kind == "delete":
            rules.append(ClassRule.delete(row["class"], row["reason"]))
        elif kind == "merge":
            rules.append(ClassRule.merge(row["class_a"], row["class_b"], row["into"]))
        else:
            raise ValidationError(f"rule {i}: unknown kind {kind!r}")
    return rules


def normalize_class_key(name: str) -> str:
    """Lower-cased plant-disease key with punctuation stripped, for
    uniqueness checks across sources."""
    out = []
    for ch in name.lower():
        if ch.isalnum():
            out.append(ch)
        elif out and out[-1] != " ":
            out.append(" ")
    return "".join(out).strip()


def packaged_rules() -> list[ClassRule]:
    """The shipped cleanup rule set (deletions plus merges)."""
    rules: list[ClassRule] = []
    for name in ("class_deletions.json", "class_merges.json"):
        with resources.files("leafkit.data").joinpath(name).open("r") as fh:
            raw = json.load(fh)
        for row in raw:
            if row["kind"] == "delete":
                rules.append(ClassRule.delete(row["class"], row["reason"]))
            else:
                rules.append(ClassRule.merge(row["class_a"], row["class_b"], row["into"]))
    return rules


def packaged_class_roster() -> list[str]:
    """The shipped 80-class roster used to validate constructed datasets."""
    text = resources.files("leafkit.data").joinpath("class_roster.txt").read_text()
    return [line.strip() for line in text.splitlines() if line.strip()]


# --------------------------------------------------------------------------
# construction operations


def merge_sources(sources) -> Manifest:
    """Combine per-source class listings into one manifest.

    ``sources`` is an iterable of (name, {class_name: [file paths]}).
    Every file becomes one record with final_class ``"<source>::<class>"``
    and no split assigned yet.
    """
    names = [name for name, _ in sources]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise InvalidArgumentError(f"duplicate source names: {dupes}")
    records = []
    for name, classes in sources:
        for cls in sorted(classes):
            files = list(classes[cls])
            if not files:
                raise InvalidArgumentError(
                    f"source {name!r} class {cls!r} has an empty file list"
                )
            for i, p in enumerate(files):
                records.append(
                    ImageRecord(
                        id=f"{name}::{cls}::{i:06d}",
                        source_dataset=name,
                        original_class=cls,
                        final_class=f"{name}::{cls}",
                        split="unassigned",
                        path=str(p),
                    )
                )
    return Manifest(records, {"sources": names})


def apply_class_rules(m: Manifest, rules, min_size: int = 200) -> Manifest:
    """Drop undersized and explicitly deleted classes, then merge duplicates.

    Classes whose record count is ``min_size`` or less are removed, along
    with any class named by a delete rule; merge rules then relabel both of
    their classes to the merged name. Rules that name a class missing from
    the manifest raise a validation error listing it.
    """
    counts = m.class_counts()
    known = set(counts)
    missing = []
    for rule in rules:
        wanted = (
            [rule.class_name] if rule.kind == "delete" else [rule.class_a, rule.class_b]
        )
        missing.extend(c for c in wanted if c not in known)
    if missing:
        raise ValidationError(f"rules reference missing classes: {sorted(set(missing))}")

    doomed = {cls for cls, n in counts.items() if n <= min_size}
    doomed.update(r.class_name for r in rules if r.kind == "delete")
    relabel: dict[str, str] = {}
    for rule in rules:
        if rule.kind == "merge":
            relabel[rule.class_a] = rule.into
            relabel[rule.class_b] = rule.into

    records = []
    for rec in m.records:
        if rec.final_class in doomed:
            continue
        target = relabel.get(rec.final_class)
        records.append(rec if target is None else replace(rec, final_class=target))
    meta = dict(m.metadata)
    meta["cleanup"] = {
        "min_size": min_size,
        "deleted_classes": sorted(doomed),
        "merges": {a: b for a, b in relabel.items()},
    }
    return Manifest(records, meta)


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    """Stratified split request.

    kind "holdout": fraction is the test share, assigns train/test over
    originals. kind "ratio": fraction is the train share, assigns
    train/test. kind "train_val": fraction is the val share, reassigns
    existing train records to train/val. Splits are always stratified per
    final_class.
    """

    kind: str
    fraction: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("holdout", "ratio", "train_val"):
            raise InvalidArgumentError(f"unknown split kind {self.kind!r}")
        if not 0.0 < self.fraction < 1.0:
            raise InvalidArgumentError("split fraction must be strictly inside (0, 1)")


def round_half_up(x: float) -> int:
    # tiny epsilon so k/2-style products that land a hair under .5 due to
    # float representation still round up
    return int(math.floor(x + 0.5 + 1e-9))


def _class_rng(seed: int, class_name: str) -> np.random.Generator:
    import hashlib

    digest = hashlib.blake2b(f"{seed}/{class_name}".encode("utf-8"), digest_size=8)
    return np.random.default_rng(int.from_bytes(digest.digest(), "little"))


def stratified_split(m: Manifest, spec: SplitSpec) -> Manifest:
    """Assign splits class by class with a seeded shuffle.

    The train side of a class of size n gets round-half-up(r * n) records,
    where r is the train fraction implied by the spec; the remainder goes
    to the other side. Classes with fewer than two records cannot be split
    two ways; they go whole to the larger side and a warning is recorded.
    """
    if any(not r.final_class for r in m.records):
        raise ValidationError("every record needs a non-empty final_class")
    if spec.kind in ("holdout", "ratio"):
        augmented = [r.id for r in m.records if r.is_augmented]
        if augmented:
            raise ValidationError(
                f"{spec.kind} split runs on original records only; "
                f"found augmented records such as {augmented[:3]}"
            )
        train_fraction = (
            1.0 - spec.fraction if spec.kind == "holdout" else spec.fraction
        )
        sides = ("train", "test")
        eligible = list(range(len(m.records)))
    else:
        train_fraction = 1.0 - spec.fraction
        sides = ("train", "val")
        eligible = [i for i, r in enumerate(m.records) if r.split == "train"]

    by_class: dict[str, list[int]] = defaultdict(list)
    for i in eligible:
        by_class[m.records[i].final_class].append(i)

    new_split: dict[int, str] = {}
    warnings: list[str] = []
    for cls in sorted(by_class):
        idxs = sorted(by_class[cls], key=lambda i: m.records[i].id)
        n = len(idxs)
        if n < 2:
            larger = sides[0] if train_fraction >= 0.5 else sides[1]
            warnings.append(
                f"class {cls!r} has {n} record(s); assigned whole to {larger}"
            )
            for i in idxs:
                new_split[i] = larger
            continue
        k = round_half_up(train_fraction * n)
        k = min(max(k, 0), n)
        perm = _class_rng(spec.seed, cls).permutation(n)
        for rank, j in enumerate(perm):
            new_split[idxs[j]] = sides[0] if rank < k else sides[1]

    records = [
        replace(rec, split=new_split[i])
        if i in new_split and new_split[i] != rec.split
        else rec
        for i, rec in enumerate(m.records)
    ]
    meta = dict(m.metadata)
    meta[f"split_{spec.kind}"] = {"fraction": spec.fraction, "seed": spec.seed}
    if warnings:
        meta.setdefault("warnings", []).extend(warnings)
    return Manifest(records, meta)


# --------------------------------------------------------------------------
# balancing


def _planned_path(parent_path: str, slug: str, op_index: int) -> str:
    if not parent_path:
        parent_path = "unnamed"
    head, sep, tail = parent_path.rpartition("/")
    stem, dot, _ = tail.rpartition(".")
    if not dot:
        stem = tail
    return f"{head}{sep}{stem}__{op_index:02d}_{slug}.png"


def balance_to_target(
    m: Manifest,
    target: int,
    mode: AugmentationMode = AugmentationMode.COMBINED,
    seed: int = 0,
) -> Manifest:
    """Make every train class exactly ``target`` records big.

    Per train class, the augmentation pool is the class's plan under
    ``mode`` (each original contributes the mode's multiplier worth of
    entries, the original itself included as the identity entry). If the
    pool is at least ``target``, records are sampled from it uniformly
    without replacement; otherwise the whole pool is taken and the
    shortfall is drawn with replacement, flagged as duplicates in a
    recorded warning. Records outside the train split pass through
    untouched and are never augmented.

    The pool is never materialized: plan entry i maps to original
    ``i // multiplier`` and op ``i % multiplier`` in plan order, so only
    sampled entries are instantiated.
    """
    if target <= 0:
        raise InvalidArgumentError("balance target must be positive")
    if all(r.split == "unassigned" for r in m.records) and m.records:
        raise ValidationError("assign splits before balancing")

    ops = ops_for_mode(mode)
    mult = len(ops)
    slugs = [op.slug() for op in ops]
    descriptors = [op.describe() for op in ops]

    by_class: dict[str, list[ImageRecord]] = defaultdict(list)
    passthrough: list[ImageRecord] = []
    for rec in m.records:
        if rec.split == "train":
            by_class[rec.final_class].append(rec)
        else:
            passthrough.append(rec)

    out: list[ImageRecord] = list(passthrough)
    warnings: list[str] = []
    for cls in sorted(by_class):
        originals = sorted(by_class[cls], key=lambda r: r.id)
        pool_size = len(originals) * mult
        rng = _class_rng(seed, cls)
        if pool_size >= target:
            chosen = [
                (int(i), 0)
                for i in np.sort(rng.choice(pool_size, size=target, replace=False))
            ]
        else:
            extra = rng.choice(pool_size, size=target - pool_size, replace=True)
            dup_counts: Counter = Counter()
            chosen = [(i, 0) for i in range(pool_size)]
            for i in np.sort(extra):
                i = int(i)
                dup_counts[i] += 1
                chosen.append((i, dup_counts[i]))
            warnings.append(
                f"class {cls!r}: pool {pool_size} < target {target}; "
                f"{target - pool_size} duplicate record(s) drawn with replacement"
            )
        for entry_idx, dup in chosen:
            src_idx, op_idx = divmod(entry_idx, mult)
            parent = originals[src_idx]
            if op_idx == 0 and dup == 0:
                out.append(parent)
                continue
            rec_id = f"{parent.id}__{op_idx:02d}_{slugs[op_idx]}"
            if dup:
                rec_id = f"{rec_id}__dup{dup:04d}"
            out.append(
                ImageRecord(
                    id=rec_id,
                    source_dataset=parent.source_dataset,
                    original_class=parent.original_class,
                    final_class=parent.final_class,
                    split="train",
                    path=_planned_path(parent.path, slugs[op_idx], op_idx),
                    lineage=Lineage(
                        parent.id, descriptors[op_idx],
                        stream_seed(seed, parent.id, op_idx),
                    ),
                )
            )

    meta = dict(m.metadata)
    meta["balance"] = {"target": target, "mode": mode.value, "seed": seed}
    if warnings:
        meta.setdefault("warnings", []).extend(warnings)
    return Manifest(out, meta)


# --------------------------------------------------------------------------
# summary


@dataclass(frozen=True)
class ManifestSummary:
    total: int
    class_count: int
    plant_count: int
    split_totals: dict
    split_percentages: dict
    per_class: dict


def _default_plant_of(final_class: str) -> str:
    name = final_class.split("::", 1)[-1]
    for sep in ("_", " ", "-"):
        if sep in name:
            return name.split(sep, 1)[0].lower()
    return name.lower()


def summarize(m: Manifest, plant_of=None) -> ManifestSummary:
    """Headline numbers for a manifest: totals per split, class and plant
    counts, per-class counts, split percentages."""
    plant_of = plant_of or _default_plant_of
    total = len(m.records)
    split_totals = Counter(r.split for r in m.records)
    per_class = dict(sorted(m.class_counts().items()))
    plants = {plant_of(c) for c in per_class}
    percentages = {
        s: (100.0 * n / total if total else 0.0) for s, n in sorted(split_totals.items())
    }
    return ManifestSummary(
        total=total,
        class_count=len(per_class),
        plant_count=len(plants),
        split_totals=dict(sorted(split_totals.items())),
        split_percentages=percentages,
        per_class=per_class,
    )
