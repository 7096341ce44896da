"""Domain-partitioned datasets, ingestion, synthetic generation, and splitters.

A domain is one (subject, session) pair. Rows carry a class label and a
domain key; every splitter and the generator are pure functions of their
inputs plus an explicit seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyInputError,
    ParseError,
    ProtocolError,
    SchemaError,
    StratificationError,
)

DEFAULT_SCHEMA = ("subject", "session", "label")


class DomainKey(NamedTuple):
    """Identity of one domain: a recording session of one subject."""

    subject: int
    session: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DomainDataset:
    """Feature matrix with per-row class label and domain key.

    features: (n, m) float matrix, labels/subjects/sessions: length-n int
    vectors. Immutable after construction; safe to share across threads.
    """

    features: np.ndarray
    labels: np.ndarray
    subjects: np.ndarray
    sessions: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ConfigError("features must be a nonempty 2-D matrix")
        labels = np.asarray(self.labels, dtype=np.int64)
        subjects = np.asarray(self.subjects, dtype=np.int64)
        sessions = np.asarray(self.sessions, dtype=np.int64)
        n = feats.shape[0]
        for name, arr in (("labels", labels), ("subjects", subjects), ("sessions", sessions)):
            if arr.shape != (n,):
                raise ConfigError(f"{name} must have length {n}, got shape {arr.shape}")
            if np.any(arr < 0):
                raise ConfigError(f"{name} must be non-negative")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != feats.shape[1]:
                raise ConfigError("feature_names length must equal feature count")
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "subjects", _frozen(subjects))
        object.__setattr__(self, "sessions", _frozen(sessions))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def domain_keys(self) -> list[DomainKey]:
        """Distinct domains, sorted by (subject, session)."""
        pairs = {(int(s), int(e)) for s, e in zip(self.subjects, self.sessions)}
        return [DomainKey(*p) for p in sorted(pairs)]

    def domain_of(self, i: int) -> DomainKey:
        return DomainKey(int(self.subjects[i]), int(self.sessions[i]))

    def rows_of(self, key: DomainKey) -> np.ndarray:
        return np.flatnonzero((self.subjects == key.subject) & (self.sessions == key.session))

    def take(self, idx: Sequence[int]) -> "DomainDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return DomainDataset(
            self.features[idx],
            self.labels[idx],
            self.subjects[idx],
            self.sessions[idx],
            self.feature_names,
        )


@dataclass(frozen=True)
class Fold:
    """One train/test partition of dataset row indices."""

    train_idx: np.ndarray
    test_idx: np.ndarray
    name: str

    def __post_init__(self):
        tr = np.asarray(self.train_idx, dtype=np.int64)
        te = np.asarray(self.test_idx, dtype=np.int64)
        if tr.size == 0 or te.size == 0:
            raise ProtocolError(f"fold {self.name!r}: train and test must both be nonempty")
        if np.intersect1d(tr, te).size > 0:
            raise ProtocolError(f"fold {self.name!r}: train and test overlap")
        object.__setattr__(self, "train_idx", _frozen(tr))
        object.__setattr__(self, "test_idx", _frozen(te))


@dataclass(frozen=True)
class SyntheticShiftConfig:
    """Controls for the shifted multi-domain Gaussian generator.

    Class means sit at the vertices of a scaled simplex (every pair at
    distance `class_separation`); each domain applies its own affine map
    x -> a_d * x + b_d with ||b_d|| = domain_shift_scale and per-feature
    factors a_d drawn from [1 - jitter, 1 + jitter]. Requires
    dim >= n_classes for the simplex placement.
    """

    n_subjects: int = 2
    n_sessions: int = 1
    n_classes: int = 2
    samples_per_class_per_domain: int = 50
    dim: int = 4
    class_separation: float = 4.0
    domain_shift_scale: float = 0.0
    domain_scale_jitter: float = 0.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_subjects", "n_sessions", "n_classes", "samples_per_class_per_domain", "dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.class_separation <= 0:
            raise ConfigError("class_separation must be > 0")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be > 0")
        if self.domain_shift_scale < 0:
            raise ConfigError("domain_shift_scale must be >= 0")
        if self.domain_scale_jitter < 0:
            raise ConfigError("domain_scale_jitter must be >= 0")
        if self.dim < self.n_classes:
            raise ConfigError("dim must be >= n_classes for simplex class-mean placement")


def _simplex_means(n_classes: int, dim: int, separation: float) -> np.ndarray:
    # Scaled standard-basis vertices, centered; every pair at distance `separation`.
    means = np.zeros((n_classes, dim))
    scale = separation / math.sqrt(2.0)
    for c in range(n_classes):
        means[c, c] = scale
    return means - means.mean(axis=0, keepdims=True)


def generate_synthetic(cfg: SyntheticShiftConfig) -> DomainDataset:
    """Draw a multi-domain dataset with identical class structure per domain.

    Domain offsets b_d point along orthonormal directions (cycling with a
    sign flip once directions run out), so any two of the first `dim`
    domains sit sqrt(2) * domain_shift_scale apart before noise.
    """
    rng = np.random.default_rng(cfg.seed)
    means = _simplex_means(cfg.n_classes, cfg.dim, cfg.class_separation)
    # Orthonormal offset directions, fixed before any per-domain draws.
    q, _ = np.linalg.qr(rng.standard_normal((cfg.dim, cfg.dim)))

    feats, labels, subjects, sessions = [], [], [], []
    domain_index = 0
    for subject in range(cfg.n_subjects):
        for session in range(cfg.n_sessions):
            direction = q[:, domain_index % cfg.dim]
            sign = -1.0 if (domain_index // cfg.dim) % 2 else 1.0
            offset = cfg.domain_shift_scale * sign * direction
            scale = rng.uniform(
                1.0 - cfg.domain_scale_jitter, 1.0 + cfg.domain_scale_jitter, size=cfg.dim
            )
            for c in range(cfg.n_classes):
                x = means[c] + cfg.noise_std * rng.standard_normal(
                    (cfg.samples_per_class_per_domain, cfg.dim)
                )
                x = scale * x + offset
                feats.append(x)
                labels.append(np.full(cfg.samples_per_class_per_domain, c))
                subjects.append(np.full(cfg.samples_per_class_per_domain, subject))
                sessions.append(np.full(cfg.samples_per_class_per_domain, session))
            domain_index += 1

    return DomainDataset(
        np.vstack(feats),
        np.concatenate(labels),
        np.concatenate(subjects),
        np.concatenate(sessions),
        tuple(f"f{j}" for j in range(cfg.dim)),
    )


def load_csv(path, schema: Sequence[str] = DEFAULT_SCHEMA) -> DomainDataset:
    """Read a dataset from CSV: schema columns are integer ids, the rest features.

    Raises SchemaError for missing columns, ParseError naming the offending
    row (1-based, header excluded) and column, EmptyInputError for a file
    without data rows.
    """
    if len(schema) != 3:
        raise SchemaError("schema must name the subject, session and label columns")
    subject_col, session_col, label_col = schema
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        for col in schema:
            if col not in header:
                raise SchemaError(f"{path}: missing required column {col!r}")
        schema_pos = {col: header.index(col) for col in schema}
        feature_cols = [(j, name) for j, name in enumerate(header) if name not in schema]
        if not feature_cols:
            raise SchemaError(f"{path}: no feature columns beyond {list(schema)}")

        feats, labels, subjects, sessions = [], [], [], []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}")

            def parse_int(col: str) -> int:
                cell = row[schema_pos[col]]
                try:
                    return int(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_num}, column {col}: {cell!r} is not an integer"
                    ) from None

            subjects.append(parse_int(subject_col))
            sessions.append(parse_int(session_col))
            labels.append(parse_int(label_col))
            values = []
            for j, name in feature_cols:
                try:
                    values.append(float(row[j]))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_num}, column {name}: {row[j]!r} is not a number"
                    ) from None
            feats.append(values)

    if not feats:
        raise EmptyInputError(f"{path}: no data rows")
    return DomainDataset(
        np.array(feats), np.array(labels), np.array(subjects), np.array(sessions),
        tuple(name for _, name in feature_cols),
    )


def save_csv(ds: DomainDataset, path) -> None:
    """Write a dataset in the ingestion format (header + one row per sample)."""
    names = ds.feature_names or tuple(f"f{j}" for j in range(ds.m))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "session", "label", *names])
        for i in range(ds.n):
            writer.writerow(
                [int(ds.subjects[i]), int(ds.sessions[i]), int(ds.labels[i])]
                + [repr(float(v)) for v in ds.features[i]]
            )


def loso_folds(ds: DomainDataset) -> list[Fold]:
    """Leave-one-subject-out folds, one per subject, ordered by subject id."""
    subject_ids = sorted({int(s) for s in ds.subjects})
    if len(subject_ids) < 2:
        raise ProtocolError("leave-one-subject-out needs at least 2 subjects")
    folds = []
    for s in subject_ids:
        test = np.flatnonzero(ds.subjects == s)
        train = np.flatnonzero(ds.subjects != s)
        folds.append(Fold(train, test, f"test-subject-{s}"))
    return folds


def hlso_folds(ds: DomainDataset) -> list[Fold]:
    """Hold-last-session-out folds: per subject, last session is the test set.

    Subject-dependent protocol, so each fold's train set holds only that
    subject's earlier sessions. Chronology is ascending session id.
    """
    folds = []
    for s in sorted({int(v) for v in ds.subjects}):
        rows = np.flatnonzero(ds.subjects == s)
        sess = ds.sessions[rows]
        distinct = sorted({int(v) for v in sess})
        if len(distinct) < 2:
            raise ProtocolError(f"subject {s} has a single session; hold-last-session-out needs >= 2")
        last = distinct[-1]
        folds.append(
            Fold(rows[sess != last], rows[sess == last], f"subject-{s}-holdout-session-{last}")
        )
    return folds


def stratified_indices(
    labels: Sequence[int], fraction: float, seed: int, idx: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Split row indices into (rest, held-out) preserving class proportions.

    Per class the held-out side gets ceil(fraction * count) rows, never
    fewer than one. Deterministic given the seed; both outputs are sorted.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if idx is None:
        idx = np.arange(labels.shape[0], dtype=np.int64)
    if idx.size == 0:
        raise EmptyInputError("cannot split an empty index set")
    if not 0.0 < fraction < 1.0:
        raise ConfigError("fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    val_parts = []
    for c in sorted({int(v) for v in labels}):
        rows = idx[labels == c]
        if rows.size < 2:
            raise StratificationError(f"class {c} has a single row; cannot stratify")
        n_val = max(1, math.ceil(fraction * rows.size))
        val_parts.append(rng.permutation(rows)[:n_val])
    val = np.sort(np.concatenate(val_parts))
    return np.setdiff1d(idx, val), val


def stratified_split(
    ds: DomainDataset, idx: Sequence[int], fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Split `idx` into (train, validation) index sets stratified by class."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise EmptyInputError("cannot split an empty index set")
    return stratified_indices(ds.labels[idx], fraction, seed, idx=idx)


def subsample_per_subject(ds: DomainDataset, k: int, seed: int) -> DomainDataset:
    """Cap each subject at k rows via class-stratified sampling.

    Per-class quotas start at ceil(k * count / total) and are then trimmed
    to sum exactly to k, removing from the smallest classes first, so a
    single retained row always comes from the majority class. Subjects
    already at or under k rows are kept whole.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    for s in sorted({int(v) for v in ds.subjects}):
        rows = np.flatnonzero(ds.subjects == s)
        if rows.size <= k:
            kept.append(rows)
            continue
        labels = ds.labels[rows]
        classes = sorted({int(v) for v in labels})
        counts = {c: int(np.sum(labels == c)) for c in classes}
        quotas = {c: math.ceil(k * counts[c] / rows.size) for c in classes}
        # Trim the ceil overshoot: smallest classes shed rows first.
        trim_order = sorted(classes, key=lambda c: (counts[c], c))
        excess = sum(quotas.values()) - k
        while excess > 0:
            for c in trim_order:
                if excess > 0 and quotas[c] > 0:
                    quotas[c] -= 1
                    excess -= 1
        for c in classes:
            class_rows = rows[labels == c]
            kept.append(np.sort(rng.permutation(class_rows)[: quotas[c]]))
    return ds.take(np.sort(np.concatenate(kept)))
