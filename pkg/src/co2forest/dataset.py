"""LIBSVM parsing, densification, preprocessing, and resampling.

The training pipeline is: parse a sparse LIBSVM text file, densify it into
a float matrix, optionally rescale the raw features, and only then append
the homogeneous ``-1`` column so that split offsets are never rescaled.
``densify_augment`` appends that column itself; ``apply_preprocess``
leaves it untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LibsvmFormatError(ValueError):
    """Malformed LIBSVM input; the message carries the offending line number."""


@dataclass
class SparseDataset:
    """Parsed LIBSVM examples with labels remapped to contiguous [0, k).

    ``examples`` holds one ``(class_index, features)`` pair per input line,
    where ``features`` is a list of ``(1-based index, value)`` with strictly
    increasing indices. ``label_map[c]`` is the original label of class c.
    """

    examples: list
    p_raw: int
    k: int
    label_map: list

    @property
    def n(self) -> int:
        return len(self.examples)


@dataclass
class Dataset:
    """Dense feature matrix with a trailing homogeneous -1 column.

    ``x`` has shape (n, p) with ``p = p_raw + 1`` and ``x[:, -1] == -1``;
    ``y`` holds class indices in [0, k). Instances are treated as immutable
    and may be shared freely across threads.
    """

    x: np.ndarray
    y: np.ndarray
    p: int
    k: int
    label_map: list

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p_raw(self) -> int:
        return self.p - 1


@dataclass
class PreprocessStats:
    """Per-raw-feature scaling statistics fitted on a training split.

    For ``minmax01`` mode, ``a``/``b`` are the column minima/maxima; for
    ``zscore`` they are the means and (population) standard deviations.
    The homogeneous column is never included.
    """

    mode: str
    a: np.ndarray
    b: np.ndarray


PREPROCESS_MODES = ("minmax01", "zscore")


def _canon_label(value: float):
    """Keep integral labels as ints so they serialize cleanly."""
    return int(value) if float(value).is_integer() else float(value)


def parse_libsvm(text, label_map: list | None = None) -> SparseDataset:
    """Parse LIBSVM sparse text (``<label> <idx>:<val> ...`` per line).

    Labels are remapped to contiguous 0-based class indices. Without an
    explicit ``label_map`` the mapping is the sorted set of labels seen;
    passing the map of a previously parsed training set makes test labels
    line up with the model's classes (unknown labels are an error).

    Raises LibsvmFormatError on malformed lines, non-increasing feature
    indices, non-finite values, or an empty stream.
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("ascii")

    rows = []
    p_raw = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = _canon_label(float(tokens[0]))
        except ValueError:
            raise LibsvmFormatError(f"line {lineno}: bad label {tokens[0]!r}") from None
        if isinstance(label, float) and not math.isfinite(label):
            raise LibsvmFormatError(f"line {lineno}: non-finite label")
        feats = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(f"line {lineno}: expected <index>:<value>, got {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmFormatError(f"line {lineno}: bad feature {tok!r}") from None
            if idx <= prev:
                raise LibsvmFormatError(
                    f"line {lineno}: feature indices must be strictly increasing (1-based)"
                )
            if not math.isfinite(val):
                raise LibsvmFormatError(f"line {lineno}: non-finite value in {tok!r}")
            feats.append((idx, val))
            prev = idx
        rows.append((label, feats))
        p_raw = max(p_raw, prev)

    if not rows:
        raise LibsvmFormatError("empty dataset")

    if label_map is None:
        label_map = sorted({label for label, _ in rows})
    index_of = {lab: c for c, lab in enumerate(label_map)}
    examples = []
    for lineno_like, (label, feats) in enumerate(rows, start=1):
        if label not in index_of:
            raise LibsvmFormatError(f"unknown label {label!r} not in label map")
        examples.append((index_of[label], feats))
    return SparseDataset(examples=examples, p_raw=p_raw, k=len(label_map), label_map=list(label_map))


def serialize_libsvm(d: SparseDataset) -> str:
    """Inverse of parse_libsvm up to whitespace; reparses to an equal dataset."""
    lines = []
    for ci, feats in d.examples:
        parts = [str(d.label_map[ci])]
        parts.extend(f"{idx}:{value!r}" for idx, value in feats)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def densify_augment(d: SparseDataset, p_raw: int | None = None) -> Dataset:
    """Densify a SparseDataset and append the homogeneous -1 column.

    Missing sparse entries become exactly 0.0. ``p_raw`` widens the matrix
    to match a model trained with more features; data exceeding it is a
    dimension mismatch.
    """
    if d.n == 0:
        raise ValueError("empty dataset")
    width = d.p_raw if p_raw is None else int(p_raw)
    if d.p_raw > width:
        raise ValueError(f"dataset has feature index {d.p_raw} > expected {width}")
    x = np.zeros((d.n, width + 1), dtype=np.float64)
    x[:, -1] = -1.0
    y = np.empty(d.n, dtype=np.int64)
    for row, (ci, feats) in enumerate(d.examples):
        y[row] = ci
        for idx, value in feats:
            x[row, idx - 1] = value
    return Dataset(x=x, y=y, p=width + 1, k=d.k, label_map=list(d.label_map))


def fit_preprocess(d: Dataset, mode: str) -> PreprocessStats:
    """Fit per-feature scaling statistics (training split only)."""
    if mode not in PREPROCESS_MODES:
        raise ValueError(f"unknown preprocess mode {mode!r}")
    raw = d.x[:, :-1]
    if mode == "minmax01":
        return PreprocessStats(mode, raw.min(axis=0), raw.max(axis=0))
    return PreprocessStats(mode, raw.mean(axis=0), raw.std(axis=0))


def transform_raw(x_raw: np.ndarray, stats: PreprocessStats) -> np.ndarray:
    """Apply fitted scaling to raw feature rows (no homogeneous column)."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    if x_raw.shape[-1] != stats.a.shape[0]:
        raise ValueError(
            f"dimension mismatch: {x_raw.shape[-1]} features vs stats for {stats.a.shape[0]}"
        )
    if stats.mode == "minmax01":
        scale = stats.b - stats.a
    else:
        scale = stats.b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (x_raw - stats.a) / scale
    # constant features (zero scale) map to 0 by convention
    return np.where(scale > 0, out, 0.0)


def apply_preprocess(d: Dataset, stats: PreprocessStats) -> Dataset:
    """Rescale the raw features of ``d``; the -1 column is untouched."""
    raw = transform_raw(d.x[:, :-1], stats)
    x = np.empty_like(d.x)
    x[:, :-1] = raw
    x[:, -1] = -1.0
    return Dataset(x=x, y=d.y.copy(), p=d.p, k=d.k, label_map=list(d.label_map))


def subset(d: Dataset, indices: np.ndarray) -> Dataset:
    """Row subset (with repetition allowed) as a new Dataset."""
    indices = np.asarray(indices, dtype=np.int64)
    return Dataset(x=d.x[indices], y=d.y[indices], p=d.p, k=d.k, label_map=list(d.label_map))


def bootstrap_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    """n indices drawn i.i.d. uniformly over [0, n), with replacement."""
    if n < 1:
        raise ValueError("cannot bootstrap an empty dataset")
    return rng.integers(0, n, size=n, dtype=np.int64)


def rebalance_classes(
    d: Dataset, target_per_class: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Resample to ``target_per_class`` examples per class.

    Undersized classes are sampled with replacement, oversized ones
    without. Returns the chosen indices (grouped by class) and per-class
    weights equal to the inverse of each class's resampling factor,
    normalized so the weights average 1; multiplying predicted class
    probabilities by these weights at test time undoes the rebalancing.
    """
    if target_per_class < 1:
        raise ValueError("target_per_class must be >= 1")
    counts = np.bincount(d.y, minlength=d.k)
    if (counts == 0).any():
        missing = int(np.nonzero(counts == 0)[0][0])
        raise ValueError(f"class {missing} has no examples")
    picks = []
    for c in range(d.k):
        members = np.nonzero(d.y == c)[0]
        if counts[c] < target_per_class:
            picks.append(rng.choice(members, size=target_per_class, replace=True))
        elif counts[c] > target_per_class:
            picks.append(rng.choice(members, size=target_per_class, replace=False))
        else:
            picks.append(members)
    weights = counts.astype(np.float64) * d.k / d.n
    return np.concatenate(picks), weights
