"""Dataset I/O and the synthetic confusing-class benchmark generator.

Feature file layout (little-endian throughout):
    bytes 0-3    magic "SPMF"
    bytes 4-5    format version, u16
    bytes 6-7    zero padding (header alignment)
    bytes 8-11   N, u32
    bytes 12-15  D, u32
    bytes 16..   N*D float32, row-major
Total length is exactly 16 + 4*N*D.

Manifests are JSON: {"name", "split", "features", "num_classes",
"instances": [{"id", "labels": [...], "multi_labels": [...]?}]}.
Train/val instances carry exactly one label; test instances carry a
non-empty label set. The optional "multi_labels" field on train records
stores the full ground-truth set (used by ideal pseudo-labeling).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .linalg import RandomSource

FEATURE_MAGIC = b"SPMF"
FEATURE_VERSION = 1
FEATURE_HEADER_LEN = 16

SPLITS = ("train", "val", "test")
AMBIGUITY_MODES = ("confusing_split", "overlap_groups")


def write_features(matrix, path) -> None:
    m = np.asarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise DataFormatError("feature matrix must be 2-D")
    n, d = m.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<HHII", FEATURE_VERSION, 0, n, d))
        fh.write(m.astype("<f4").tobytes())


def read_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < FEATURE_HEADER_LEN:
        raise DataFormatError(
            f"{path}: file too short for a feature header "
            f"({len(blob)} < {FEATURE_HEADER_LEN} bytes)")
    if blob[:4] != FEATURE_MAGIC:
        raise DataFormatError(f"{path}: bad magic {blob[:4]!r} at offset 0")
    version, _pad, n, d = struct.unpack("<HHII", blob[4:FEATURE_HEADER_LEN])
    if version != FEATURE_VERSION:
        raise DataFormatError(f"{path}: unsupported feature version {version}")
    expected = FEATURE_HEADER_LEN + 4 * n * d
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes for N={n}, D={d}, "
            f"got {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=FEATURE_HEADER_LEN) \
             .reshape(n, d).astype(np.float64)


@dataclass
class InstanceRecord:
    id: int
    labels: list[int]
    multi_labels: list[int] | None = None


@dataclass
class DatasetManifest:
    name: str
    split: str
    features: str            # path to the feature file, relative to the manifest
    num_classes: int
    instances: list[InstanceRecord]
    path: Path | None = None  # where the manifest was loaded from

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DataFormatError(f"split must be one of {SPLITS}, "
                                  f"got {self.split!r}")
        for rec in self.instances:
            if self.split in ("train", "val"):
                if len(rec.labels) != 1:
                    raise DataFormatError(
                        f"instance {rec.id}: {self.split} records need "
                        f"exactly one label, got {rec.labels}")
            else:
                if not rec.labels:
                    raise DataFormatError(
                        f"instance {rec.id}: test records need a non-empty "
                        f"label set")
            for groups in (rec.labels, rec.multi_labels or []):
                for lab in groups:
                    if not 0 <= lab < self.num_classes:
                        raise DataFormatError(
                            f"instance {rec.id}: label {lab} out of range "
                            f"[0, {self.num_classes})")
            if rec.multi_labels is not None and rec.labels and \
                    rec.labels[0] not in rec.multi_labels:
                raise DataFormatError(
                    f"instance {rec.id}: single label {rec.labels[0]} not "
                    f"in multi_labels {rec.multi_labels}")

    def single_labels(self) -> np.ndarray:
        return np.array([rec.labels[0] for rec in self.instances],
                        dtype=np.int64)

    def label_sets(self) -> list[set[int]]:
        return [set(rec.labels) for rec in self.instances]

    def multi_label_sets(self) -> list[set[int]]:
        if any(rec.multi_labels is None for rec in self.instances):
            raise DataFormatError(
                f"manifest {self.name!r} lacks multi_labels; regenerate the "
                f"dataset or use a different pseudo mode")
        return [set(rec.multi_labels) for rec in self.instances]

    def feature_path(self) -> Path:
        base = self.path.parent if self.path else Path(".")
        return base / self.features

    def load_features(self) -> np.ndarray:
        feats = read_features(self.feature_path())
        if feats.shape[0] != len(self.instances):
            raise DataFormatError(
                f"feature file has {feats.shape[0]} rows for "
                f"{len(self.instances)} manifest instances")
        return feats

    def to_dict(self) -> dict:
        insts = []
        for rec in self.instances:
            d = {"id": rec.id, "labels": rec.labels}
            if rec.multi_labels is not None:
                d["multi_labels"] = rec.multi_labels
            insts.append(d)
        return {"name": self.name, "split": self.split,
                "features": self.features, "num_classes": self.num_classes,
                "instances": insts}

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.path = path


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc
    try:
        instances = [InstanceRecord(id=int(r["id"]),
                                    labels=[int(x) for x in r["labels"]],
                                    multi_labels=(
                                        [int(x) for x in r["multi_labels"]]
                                        if "multi_labels" in r else None))
                     for r in raw["instances"]]
        return DatasetManifest(name=raw["name"], split=raw["split"],
                               features=raw["features"],
                               num_classes=int(raw["num_classes"]),
                               instances=instances, path=path)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: missing or malformed field ({exc})") from exc


@dataclass
class SynthConfig:
    """Knobs for the synthetic ambiguous benchmark.

    base_classes Gaussian clusters; each expands into a group of
    group_size classes sharing that cluster (group_size is fixed at 2 in
    confusing_split mode). Train/val instances get one uniformly random
    in-group label, test instances get the whole group.
    """

    base_classes: int = 20
    train_per_class: int = 30
    val_per_class: int = 10
    test_per_class: int = 10
    dim: int = 16
    cluster_std: float = 1.0
    center_scale: float = 5.0
    ambiguity_mode: str = "confusing_split"
    group_size: int = 2
    seed: int = 0

    def __post_init__(self):
        counts = (self.base_classes, self.train_per_class, self.val_per_class,
                  self.test_per_class, self.dim, self.group_size)
        if any(v < 1 for v in counts):
            raise ConfigError(f"all counts must be >= 1, got {self}")
        if self.cluster_std <= 0:
            raise ConfigError(f"cluster_std must be > 0, got {self.cluster_std}")
        if self.ambiguity_mode not in AMBIGUITY_MODES:
            raise ConfigError(f"ambiguity_mode must be one of "
                              f"{AMBIGUITY_MODES}, got {self.ambiguity_mode!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown synth config fields: {sorted(bad)}")
        return cls(**raw)


def _generate_grouped(config: SynthConfig, group_size: int,
                      out_dir) -> dict[str, DatasetManifest]:
    """Shared generator: base_classes clusters, group_size class ids per
    cluster; class ids for base class c are [c*g, c*g + g)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = RandomSource(config.seed)
    g = group_size
    num_classes = config.base_classes * g
    centers = config.center_scale * rng.gaussian(
        0.0, 1.0, config.base_classes * config.dim).reshape(
        config.base_classes, config.dim)

    per_split = {"train": config.train_per_class, "val": config.val_per_class,
                 "test": config.test_per_class}
    manifests = {}
    for split, per_class in per_split.items():
        rows, records = [], []
        next_id = 0
        for base in range(config.base_classes):
            group = list(range(base * g, base * g + g))
            samples = rng.gaussian(
                0.0, config.cluster_std,
                per_class * config.dim).reshape(per_class, config.dim)
            samples = samples + centers[base]
            for row in samples:
                rows.append(row)
                if split == "test":
                    records.append(InstanceRecord(id=next_id, labels=group))
                else:
                    pick = group[int(rng.integers(0, g))]
                    records.append(InstanceRecord(id=next_id, labels=[pick],
                                                  multi_labels=group))
                next_id += 1
        features_name = f"{split}_features.spmf"
        write_features(np.array(rows), out_dir / features_name)
        manifest = DatasetManifest(
            name=f"synthetic_{config.ambiguity_mode}_{split}",
            split=split, features=features_name, num_classes=num_classes,
            instances=records)
        manifest.save(out_dir / f"{split}_manifest.json")
        manifests[split] = manifest
    return manifests


def generate_confusing(config: SynthConfig, out_dir) -> dict[str, DatasetManifest]:
    """Every base class c splits into twin classes 2c and 2c+1; train/val
    instances get one twin at random, test instances get both."""
    if config.ambiguity_mode != "confusing_split":
        raise ConfigError("generate_confusing requires "
                          "ambiguity_mode='confusing_split'")
    return _generate_grouped(config, group_size=2, out_dir=out_dir)


def generate_overlap_groups(config: SynthConfig,
                            out_dir) -> dict[str, DatasetManifest]:
    """k-way generalization: groups of group_size classes share a cluster."""
    if config.ambiguity_mode != "overlap_groups":
        raise ConfigError("generate_overlap_groups requires "
                          "ambiguity_mode='overlap_groups'")
    return _generate_grouped(config, group_size=config.group_size,
                             out_dir=out_dir)


def generate(config: SynthConfig, out_dir) -> dict[str, DatasetManifest]:
    if config.ambiguity_mode == "confusing_split":
        return generate_confusing(config, out_dir)
    return generate_overlap_groups(config, out_dir)
