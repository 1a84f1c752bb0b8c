"""Pseudo-label generation.

Instance-level sets come from the label frequencies of each training
instance's K nearest neighbours (exhaustive scan, cosine or euclidean).
Class-level sets come from a row-normalized label co-occurrence table.
Ideal sets are the true multi-label ground truth minus the single label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DomainError, ShapeError

SIMILARITY_KINDS = ("cosine", "euclidean")


@dataclass
class PseudoLabelSet:
    """Extra likely-positive classes for one instance, with the neighbour
    label frequencies that produced them (kept for diagnostics)."""

    instance_id: int
    single_label: int
    labels: set[int]
    frequencies: dict[int, float] = field(default_factory=dict)


class NeighborIndex:
    """Exhaustive-scan nearest-neighbour index over the training features.

    Cosine mode L2-normalizes every row at build time and rejects
    zero-norm rows. Ties in similarity break by ascending instance id.
    """

    def __init__(self, features: np.ndarray, similarity: str = "cosine"):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ShapeError("features must be a 2-D matrix")
        if features.shape[0] < 2:
            raise DomainError("index needs at least 2 instances")
        if similarity not in SIMILARITY_KINDS:
            raise DomainError(f"similarity must be one of {SIMILARITY_KINDS}, "
                              f"got {similarity!r}")
        self.similarity = similarity
        if similarity == "cosine":
            norms = np.linalg.norm(features, axis=1)
            zero = np.nonzero(norms == 0)[0]
            if zero.size:
                raise DomainError(
                    f"zero-norm feature row {int(zero[0])} cannot be "
                    f"cosine-normalized")
            features = features / norms[:, None]
        self.features = features

    def __len__(self):
        return self.features.shape[0]

    def similarities(self, query_id: int) -> np.ndarray:
        """Similarity of every indexed row to the given row (higher is
        closer; euclidean mode returns negated distances)."""
        q = self.features[query_id]
        if self.similarity == "cosine":
            return self.features @ q
        diff = self.features - q
        return -np.sqrt((diff * diff).sum(axis=1))

    def knn(self, query_id: int, k: int) -> np.ndarray:
        """K nearest instance ids, self excluded, by decreasing similarity;
        ties by ascending id."""
        n = len(self)
        if not 0 <= query_id < n:
            raise DomainError(f"query id {query_id} out of range [0, {n})")
        if k < 1 or k >= n:
            raise DomainError(f"K must satisfy 1 <= K < N={n}, got {k}")
        sim = self.similarities(query_id)
        ids = np.arange(n)
        order = np.lexsort((ids, -sim))
        order = order[order != query_id]
        return order[:k]


def build_index(features, similarity: str = "cosine") -> NeighborIndex:
    return NeighborIndex(features, similarity)


def knn(index: NeighborIndex, query_id: int, k: int) -> np.ndarray:
    return index.knn(query_id, k)


def instance_pseudo_labels(index: NeighborIndex, labels, k: int,
                           tau: float) -> list[PseudoLabelSet]:
    """Per-instance pseudo sets from neighbour label frequencies.

    For each instance: omega(label) = count among the K neighbours / K;
    keep labels with omega strictly greater than tau, never the
    instance's own label.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(index),):
        raise ShapeError(f"labels shape {labels.shape} != ({len(index)},)")
    if not 0.0 <= tau < 1.0:
        raise DomainError(f"tau must be in [0, 1), got {tau}")
    out = []
    for i in range(len(index)):
        neigh = index.knn(i, k)
        counts: dict[int, int] = {}
        for lab in labels[neigh]:
            counts[int(lab)] = counts.get(int(lab), 0) + 1
        freqs = {lab: cnt / k for lab, cnt in counts.items()}
        own = int(labels[i])
        kept = {lab for lab, om in freqs.items() if om > tau and lab != own}
        out.append(PseudoLabelSet(instance_id=i, single_label=own,
                                  labels=kept,
                                  frequencies={lab: freqs[lab] for lab in kept}))
    return out


@dataclass
class CooccurrenceTable:
    """C x C joint annotation counts plus row-normalized ratios.

    ratio[i, j] = count(i and j annotated together) / count(i annotated);
    the diagonal is 1 wherever class i occurs at all.
    """

    counts: np.ndarray
    ratios: np.ndarray

    @classmethod
    def from_label_sets(cls, label_sets: list[set[int]],
                        num_classes: int) -> "CooccurrenceTable":
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        for labels in label_sets:
            for a in labels:
                for b in labels:
                    counts[a, b] += 1
        occ = np.diag(counts).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(occ[:, None] > 0, counts / occ[:, None], 0.0)
        return cls(counts=counts, ratios=ratios)


def class_pseudo_labels(cooc: CooccurrenceTable,
                        threshold: float = 0.5) -> list[set[int]]:
    """Per-class pseudo sets: class j joins class i's set when their
    row-normalized co-occurrence ratio is >= threshold."""
    c = cooc.ratios.shape[0]
    out = []
    for i in range(c):
        out.append({j for j in range(c)
                    if j != i and cooc.ratios[i, j] >= threshold})
    return out


def assign_class_pseudo_labels(per_class: list[set[int]],
                               single_labels) -> list[PseudoLabelSet]:
    """Give every instance the pseudo set of its annotated class."""
    single_labels = np.asarray(single_labels, dtype=np.int64)
    out = []
    for i, y in enumerate(single_labels):
        labels = set(per_class[int(y)]) - {int(y)}
        out.append(PseudoLabelSet(instance_id=i, single_label=int(y),
                                  labels=labels))
    return out


def ideal_pseudo_labels(true_multilabels: list[set[int]],
                        single_labels) -> list[PseudoLabelSet]:
    """Oracle pseudo sets: the true label set minus the single label."""
    single_labels = np.asarray(single_labels, dtype=np.int64)
    if len(true_multilabels) != single_labels.shape[0]:
        raise ShapeError("true_multilabels and single_labels lengths differ")
    out = []
    for i, (full, y) in enumerate(zip(true_multilabels, single_labels)):
        y = int(y)
        if y not in full:
            raise ConsistencyError(
                f"instance {i}: single label {y} not in its true set {sorted(full)}")
        out.append(PseudoLabelSet(instance_id=i, single_label=y,
                                  labels=set(full) - {y}))
    return out


def save_pseudo_labels(sets: list[PseudoLabelSet], path) -> None:
    """JSON-lines: one {id, single_label, pseudo: [[class, omega], ...]}
    record per instance; omega is null for modes without frequencies."""
    with open(path, "w") as fh:
        for ps in sets:
            record = {
                "id": ps.instance_id,
                "single_label": ps.single_label,
                "pseudo": [[lab, ps.frequencies.get(lab)]
                           for lab in sorted(ps.labels)],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_pseudo_labels(path) -> list[PseudoLabelSet]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            labels = {int(lab) for lab, _ in rec["pseudo"]}
            freqs = {int(lab): om for lab, om in rec["pseudo"] if om is not None}
            out.append(PseudoLabelSet(instance_id=int(rec["id"]),
                                      single_label=int(rec["single_label"]),
                                      labels=labels, frequencies=freqs))
    return out
