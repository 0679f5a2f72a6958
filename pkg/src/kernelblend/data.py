"""Dataset ingestion, scaling, and seeded repeated partitioning.

Two text formats are read: delimited feature tables with a label column,
and the de-facto sparse ``label index:value`` format (1-based indices).
The cleaned 683x9 breast-cancer benchmark ships with the package; its
sha256 is pinned in ``data/README.md`` and verified on load.

Splits use the Philox counter-based generator, which is reproducible
across platforms and numpy versions; repetition r draws from the
substream spawned as (master_seed, r).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

import numpy as np


class DataFormatError(ValueError):
    """A file could not be parsed; the message names the offending line."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with +/-1 labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None
    source_id: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be 2-d")
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} rows but {y.shape} labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must all be -1 or +1")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx, tag: str = "subset") -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(
            X=np.array(self.X[idx]),
            y=np.array(self.y[idx]),
            feature_names=self.feature_names,
            source_id=f"{self.source_id}[{tag}]",
        )


def _map_label(token: str, label_map, path: str, lineno: int) -> int:
    token = token.strip()
    if label_map is not None and token in label_map:
        value = label_map[token]
    else:
        try:
            value = float(token)
        except ValueError:
            raise DataFormatError(f"{path}, line {lineno}: unknown label {token!r}") from None
    if value == 1:
        return 1
    if value == -1:
        return -1
    raise DataFormatError(f"{path}, line {lineno}: label {token!r} does not map to -1/+1")


def load_delimited(
    path,
    label_column: int = -1,
    delimiter: str = ",",
    label_map=None,
    has_header: bool = False,
    source_id: str | None = None,
) -> LabeledDataset:
    """Read a delimited text table with one label column.

    Missing values are rejected. ``label_map`` translates label tokens to
    +/-1; without it, label tokens must parse to exactly +/-1.
    """
    path = str(path)
    rows, labels = [], []
    feature_names = None
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(delimiter)]
            if has_header and feature_names is None and lineno == 1:
                feature_names = cells
                continue
            if width is None:
                width = len(cells)
                if width < 2:
                    raise DataFormatError(f"{path}, line {lineno}: need at least one feature and a label")
            elif len(cells) != width:
                raise DataFormatError(
                    f"{path}, line {lineno}: expected {width} columns, found {len(cells)}"
                )
            col = label_column if label_column >= 0 else width + label_column
            if not 0 <= col < width:
                raise DataFormatError(f"{path}: label column {label_column} out of range")
            labels.append(_map_label(cells[col], label_map, path, lineno))
            feats = []
            for j, cell in enumerate(cells):
                if j == col:
                    continue
                if cell == "" or cell in ("?", "NA", "nan"):
                    raise DataFormatError(f"{path}, line {lineno}, column {j + 1}: missing value")
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}, line {lineno}, column {j + 1}: not a number: {cell!r}"
                    ) from None
            rows.append(feats)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    names = None
    if feature_names is not None:
        col = label_column if label_column >= 0 else len(feature_names) + label_column
        names = tuple(nm for j, nm in enumerate(feature_names) if j != col)
    return LabeledDataset(
        X=np.array(rows, dtype=np.float64),
        y=np.array(labels, dtype=np.int64),
        feature_names=names,
        source_id=source_id or path,
    )


def load_sparse_format(path, source_id: str | None = None) -> LabeledDataset:
    """Read ``label index:value`` lines; indices are 1-based, gaps are zeros."""
    path = str(path)
    entries, labels = [], []
    width = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_map_label(tokens[0], None, path, lineno))
            row = {}
            for tok in tokens[1:]:
                idx_text, sep, val_text = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"{path}, line {lineno}: malformed pair {tok!r}")
                try:
                    idx = int(idx_text)
                    val = float(val_text)
                except ValueError:
                    raise DataFormatError(f"{path}, line {lineno}: malformed pair {tok!r}") from None
                if idx < 1:
                    raise DataFormatError(f"{path}, line {lineno}: index {idx} is not 1-based")
                if idx in row:
                    raise DataFormatError(f"{path}, line {lineno}: duplicate index {idx}")
                row[idx] = val
                width = max(width, idx)
            entries.append(row)
    if not entries:
        raise DataFormatError(f"{path}: no data rows")
    X = np.zeros((len(entries), width))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            X[i, idx - 1] = val
    return LabeledDataset(
        X=X,
        y=np.array(labels, dtype=np.int64),
        source_id=source_id or path,
    )


#: sha256 of the bundled cleaned benchmark file (683 rows, 9 features)
CANCER_SHA256 = "8816d41c1c9aa939fd27ae2314b43c68237c875b6cf86bb49c2718f311afc603"

CANCER_FEATURES = (
    "clump_thickness",
    "cell_size_uniformity",
    "cell_shape_uniformity",
    "marginal_adhesion",
    "single_epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
)


def load_cancer(verify: bool = True) -> LabeledDataset:
    """The bundled breast-cancer benchmark: 683 biopsies, 9 features in 1..10,
    malignant mapped to +1 and benign to -1."""
    ref = resources.files("kernelblend").joinpath("data/cancer.csv")
    raw = ref.read_bytes()
    if verify:
        digest = hashlib.sha256(raw).hexdigest()
        if digest != CANCER_SHA256:
            raise DataFormatError(
                f"bundled cancer.csv checksum mismatch: {digest} != {CANCER_SHA256}"
            )
    rows = []
    labels = []
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        cells = line.split(",")
        rows.append([float(c) for c in cells[:-1]])
        labels.append(int(cells[-1]))
    return LabeledDataset(
        X=np.array(rows),
        y=np.array(labels),
        feature_names=CANCER_FEATURES,
        source_id="cancer",
    )


@dataclass(frozen=True)
class SplitPlan:
    """Seeded plan for repeated random train/test partitions."""

    master_seed: int
    repetitions: int = 10
    train_fraction: float = 0.7

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def _rep_rng(master_seed: int, rep: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(rep,))
    return np.random.Generator(np.random.Philox(seq))


def make_splits(ds: LabeledDataset, plan: SplitPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint, exhaustive (train, test) index pairs, one per repetition.

    Deterministic across runs and platforms for a given plan.
    """
    n = ds.n
    n_train = int(np.floor(plan.train_fraction * n))
    if n_train < 1 or n - n_train < 1:
        raise ValueError(
            f"degenerate split: {n_train} train / {n - n_train} test points from n={n}"
        )
    splits = []
    for rep in range(plan.repetitions):
        perm = _rep_rng(plan.master_seed, rep).permutation(n)
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
        splits.append((train_idx, test_idx))
    return splits


SCALING_MODES = ("none", "unit_interval", "zscore")


@dataclass(frozen=True)
class ScalingTransform:
    """Per-feature affine map fitted on training data only: (x - shift) * factor."""

    mode: str
    shift: np.ndarray
    factor: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.shift) * self.factor


def fit_scaling(train_X: np.ndarray, mode: str) -> ScalingTransform:
    train_X = np.asarray(train_X, dtype=np.float64)
    d = train_X.shape[1]
    if mode == "none":
        return ScalingTransform(mode, np.zeros(d), np.ones(d))
    if mode == "unit_interval":
        lo = train_X.min(axis=0)
        span = train_X.max(axis=0) - lo
        factor = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
        return ScalingTransform(mode, lo, factor)
    if mode == "zscore":
        mean = train_X.mean(axis=0)
        std = train_X.std(axis=0)
        factor = np.where(std > 0, 1.0 / np.where(std > 0, std, 1.0), 1.0)
        return ScalingTransform(mode, mean, factor)
    raise ValueError(f"unknown scaling mode {mode!r}")


def fit_apply_scaling(
    train: LabeledDataset,
    test: LabeledDataset | None,
    mode: str,
) -> tuple[LabeledDataset, LabeledDataset | None, ScalingTransform]:
    """Fit on train, apply to both; test statistics never enter the fit."""
    transform = fit_scaling(train.X, mode)
    if mode == "none":
        return train, test, transform
    train_out = LabeledDataset(
        X=transform.apply(train.X),
        y=np.array(train.y),
        feature_names=train.feature_names,
        source_id=train.source_id,
    )
    test_out = None
    if test is not None:
        test_out = LabeledDataset(
            X=transform.apply(test.X),
            y=np.array(test.y),
            feature_names=test.feature_names,
            source_id=test.source_id,
        )
    return train_out, test_out, transform
