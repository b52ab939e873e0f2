"""Nearest-prototype classification over precomputed embedding vectors.

A prototype is the per-class mean of k support embeddings (k=1 collapses
to the single support). Queries are assigned the label whose prototype is
closest in Euclidean distance; no training happens anywhere. The module is
agnostic to where embeddings were tapped from a network, it only requires
one consistent dimension per collection.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidArgumentError, ParseError, ValidationError
from .kernels import distance_matrix
from .metrics import MetricReport, compute_report, confusion_from_pairs


@dataclass(frozen=True)
class Embedding:
    id: str
    label: str  # empty marks an unlabeled query
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise InvalidArgumentError("embedding vector must be 1-D and non-empty")
        if not np.all(np.isfinite(vec)):
            raise InvalidArgumentError(f"embedding {self.id!r} has non-finite values")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    @property
    def dimension(self) -> int:
        return int(self.vector.size)


@dataclass(frozen=True)
class ShotConfig:
    """Support selection: k supports per class, picked with a seeded draw."""

    k: int
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError("shot count k must be >= 1")


@dataclass(frozen=True)
class PrototypeSet:
    dimension: int
    prototypes: dict  # label -> 1-D float64 vector
    shots: int

    def __post_init__(self):
        if not self.prototypes:
            raise InvalidArgumentError("prototype set must not be empty")
        for label, vec in self.prototypes.items():
            if np.asarray(vec).shape != (self.dimension,):
                raise DimensionError(
                    f"prototype {label!r} must have dimension {self.dimension}"
                )

    def labels(self) -> list[str]:
        return sorted(self.prototypes)

    def matrix(self) -> np.ndarray:
        return np.stack([self.prototypes[lab] for lab in self.labels()])


# --------------------------------------------------------------------------
# embedding file format: header "id,label,dim=D", rows "id,label,v0,...,v(D-1)"


def parse_embeddings(path) -> list[Embedding]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty embedding file") from None
        if len(header) != 3 or header[0] != "id" or header[1] != "label" \
                or not header[2].startswith("dim="):
            raise ParseError(f"{path}:1: expected header 'id,label,dim=D'")
        try:
            dim = int(header[2][4:])
        except ValueError:
            raise ParseError(f"{path}:1: bad dimension in {header[2]!r}") from None
        out = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + dim:
                raise ParseError(
                    f"{path}:{ln}: expected {2 + dim} cells, found {len(row)}"
                )
            try:
                vec = np.array([float(tok) for tok in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: non-numeric cell: {exc}") from exc
            out.append(Embedding(row[0], row[1], vec))
    return out


def write_embeddings(embeddings, path) -> None:
    embeddings = list(embeddings)
    if not embeddings:
        raise InvalidArgumentError("nothing to write")
    dim = embeddings[0].dimension
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", f"dim={dim}"])
        for e in embeddings:
            if e.dimension != dim:
                raise DimensionError(
                    f"embedding {e.id!r} has dimension {e.dimension}, expected {dim}"
                )
            writer.writerow([e.id, e.label] + [repr(float(v)) for v in e.vector])


# --------------------------------------------------------------------------
# prototypes and prediction


def _check_uniform_dimension(embeddings) -> int:
    dims = {e.dimension for e in embeddings}
    if len(dims) != 1:
        raise DimensionError(f"mixed embedding dimensions: {sorted(dims)}")
    return dims.pop()


def build_prototypes(supports, cfg: ShotConfig) -> PrototypeSet:
    """Average k seeded-sampled supports per class into one prototype each.

    Classes offering exactly k supports contribute all of them; classes
    with fewer than k raise. The per-class draw depends only on
    (cfg.seed, label), so adding a class never reshuffles another.
    """
    supports = list(supports)
    if not supports:
        raise InvalidArgumentError("no support embeddings given")
    dim = _check_uniform_dimension(supports)
    by_label: dict[str, list[Embedding]] = defaultdict(list)
    for e in supports:
        if not e.label:
            raise ValidationError(f"support embedding {e.id!r} is unlabeled")
        by_label[e.label].append(e)

    import hashlib

    prototypes = {}
    for label in sorted(by_label):
        pool = sorted(by_label[label], key=lambda e: e.id)
        if len(pool) < cfg.k:
            raise ValidationError(
                f"class {label!r} has {len(pool)} support(s), needs k={cfg.k}"
            )
        if len(pool) == cfg.k:
            picked = pool
        else:
            digest = hashlib.blake2b(
                f"{cfg.seed}/{label}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            idx = rng.choice(len(pool), size=cfg.k, replace=False)
            picked = [pool[i] for i in sorted(idx)]
        prototypes[label] = np.mean([e.vector for e in picked], axis=0)
    return PrototypeSet(dimension=dim, prototypes=prototypes, shots=cfg.k)


def euclidean_distance(x, y) -> float:
    """Plain Euclidean distance between two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    # np.dot accumulates pairwise, which keeps error small at dim ~2000
    return float(np.sqrt(np.dot(diff, diff)))


def predict(query: Embedding, protos: PrototypeSet):
    """Label of the nearest prototype plus the full distance map.

    Equal distances resolve to the lexicographically smallest label.
    """
    if query.dimension != protos.dimension:
        raise DimensionError(
            f"query dimension {query.dimension} != prototypes {protos.dimension}"
        )
    labels = protos.labels()
    dists = distance_matrix(query.vector[None, :], protos.matrix())[0]
    best = int(np.argmin(dists))  # argmin takes the first (smallest label) on ties
    return labels[best], {lab: float(d) for lab, d in zip(labels, dists)}


def predict_batch(queries, protos: PrototypeSet) -> list[str]:
    """Vectorized :func:`predict` over many queries, labels only."""
    queries = list(queries)
    if not queries:
        return []
    dim = _check_uniform_dimension(queries)
    if dim != protos.dimension:
        raise DimensionError(
            f"query dimension {dim} != prototypes {protos.dimension}"
        )
    labels = protos.labels()
    mat = np.stack([q.vector for q in queries])
    dists = distance_matrix(mat, protos.matrix())
    return [labels[i] for i in np.argmin(dists, axis=1)]


def evaluate(queries, protos: PrototypeSet) -> MetricReport:
    """Predict every labeled query and score the resulting confusion matrix."""
    queries = list(queries)
    if not queries:
        raise InvalidArgumentError("no queries to evaluate")
    unlabeled = [q.id for q in queries if not q.label]
    if unlabeled:
        raise ValidationError(f"queries must be labeled, found unlabeled: {unlabeled[:3]}")
    predictions = predict_batch(queries, protos)
    labels = sorted(set(protos.labels()) | {q.label for q in queries})
    cm = confusion_from_pairs(
        [(q.label, p) for q, p in zip(queries, predictions)], labels
    )
    return compute_report(cm)
