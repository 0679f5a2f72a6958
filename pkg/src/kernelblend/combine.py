"""Label-aware combination of kernel matrices.

The combination rules build a similarity matrix that is large for
same-class pairs and small for different-class pairs:

* pairwise max/min:  max(K1, K2) on same-label entries, min on the rest
* absolute-value form:  (K1 + K2)/2 + Y |K1 - K2| Y / 2   (entrywise |.|)
* multi-kernel:  Kbar + Y * correction * Y, where the correction is either
  the sum of entrywise deviations |Km - Kbar| (``abs``, the AV rule) or a
  pairwise sum g(Ki - Kj) over i < j (``half_abs``, ``threshold``)

Y = diag(labels), so the sign of each correction entry is y_i * y_j.
Labeled combination only exists on the training set; `combine_test_rows`
implements the two policies for unlabeled test points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import COMBINED, GramMatrix

G_FUNCTIONS = ("abs", "half_abs", "threshold")
TEST_EVAL_MODES = ("average_fallback", "predicted_label")


@dataclass(frozen=True)
class LabelDiagonal:
    """The +/-1 labels of a training sample, viewed as diag(y)."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise ValueError("labels must be a 1-d vector")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must all be -1 or +1")
        y = y.astype(np.int64)
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def signs(self) -> np.ndarray:
        return self.y.astype(np.float64)

    def outer(self) -> np.ndarray:
        """Matrix of products y_i * y_j."""
        s = self.signs()
        return np.outer(s, s)


@dataclass(frozen=True)
class CombinerConfig:
    """How to combine multiple kernels and how to score unlabeled points.

    ``g_function``: ``abs`` (default; per-kernel deviations from the mean),
    ``half_abs`` (pairwise, reproduces the two-kernel absolute-value form
    at M=2), or ``threshold`` (pairwise half-abs with differences of
    magnitude below ``threshold`` treated as null). Every choice maps the
    zero matrix to the zero matrix.

    ``test_eval_mode``: ``average_fallback`` scores test points with the
    plain kernel average; ``predicted_label`` substitutes a provisional
    label for the unknown test label in the combination formula.
    """

    g_function: str = "abs"
    test_eval_mode: str = "average_fallback"
    threshold: float = 0.0

    def __post_init__(self):
        if self.g_function not in G_FUNCTIONS:
            raise ValueError(f"unknown g_function {self.g_function!r}")
        if self.test_eval_mode not in TEST_EVAL_MODES:
            raise ValueError(f"unknown test_eval_mode {self.test_eval_mode!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")

    @classmethod
    def from_options(cls, combine: str = "av", test_eval: str = "avg") -> "CombinerConfig":
        """Parse CLI/config strings: ``combine=av|half_abs``, ``test_eval=avg|pred``."""
        g_map = {"av": "abs", "abs": "abs", "half_abs": "half_abs"}
        mode_map = {"avg": "average_fallback", "pred": "predicted_label"}
        combine = combine.strip().lower()
        test_eval = test_eval.strip().lower()
        threshold = 0.0
        if combine.startswith("threshold:"):
            threshold = float(combine.split(":", 1)[1])
            g = "threshold"
        elif combine in g_map:
            g = g_map[combine]
        else:
            raise ValueError(f"unknown combine option {combine!r}")
        if test_eval not in mode_map:
            raise ValueError(f"unknown test_eval option {test_eval!r}")
        return cls(g_function=g, test_eval_mode=mode_map[test_eval], threshold=threshold)


def _entries(K) -> np.ndarray:
    return K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)


def _check_sizes(mats: Sequence[np.ndarray], y: LabelDiagonal):
    for M in mats:
        if M.shape != (y.n, y.n):
            raise ValueError(f"matrix shape {M.shape} does not match {y.n} labels")


def combine_pairwise_maxmin(K1, K2, y: LabelDiagonal) -> GramMatrix:
    """Entrywise max on same-label pairs, min on different-label pairs."""
    A, B = _entries(K1), _entries(K2)
    _check_sizes((A, B), y)
    same = np.equal.outer(y.y, y.y)
    out = np.where(same, np.maximum(A, B), np.minimum(A, B))
    return GramMatrix(out, COMBINED)


def combine_abs_form(K1, K2, y: LabelDiagonal) -> GramMatrix:
    """(K1 + K2)/2 + Y |K1 - K2| Y / 2, equal to the max/min combination."""
    A, B = _entries(K1), _entries(K2)
    _check_sizes((A, B), y)
    out = 0.5 * (A + B) + 0.5 * y.outer() * np.abs(A - B)
    return GramMatrix(out, COMBINED)


def _g_correction(mats: list[np.ndarray], kbar: np.ndarray, cfg: CombinerConfig) -> np.ndarray:
    """The label-free correction term: sum of g() over kernel differences."""
    if cfg.g_function == "abs":
        corr = np.zeros_like(kbar)
        for M in mats:
            corr += np.abs(M - kbar)
        return corr
    corr = np.zeros_like(kbar)
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            diff = np.abs(mats[i] - mats[j])
            if cfg.g_function == "threshold":
                diff = np.where(diff >= cfg.threshold, diff, 0.0)
            corr += 0.5 * diff
    return corr


def combine_multi(Ks: Sequence, y: LabelDiagonal, cfg: CombinerConfig | None = None) -> GramMatrix:
    """Combine M >= 1 kernel matrices: Kbar + Y * correction * Y."""
    if len(Ks) == 0:
        raise ValueError("need at least one kernel matrix to combine")
    cfg = cfg or CombinerConfig()
    mats = [_entries(K) for K in Ks]
    _check_sizes(mats, y)
    kbar = sum(mats) / len(mats)
    if len(mats) == 1:
        return GramMatrix(kbar, COMBINED)
    out = kbar + y.outer() * _g_correction(mats, kbar, cfg)
    return GramMatrix(out, COMBINED)


def combine_test_rows(
    cross_grams: Sequence[np.ndarray],
    y_train: LabelDiagonal,
    cfg: CombinerConfig | None = None,
    provisional_labels=None,
) -> np.ndarray:
    """Combined kernel rows for unlabeled test points.

    ``average_fallback`` returns the entrywise mean of the cross-Gram
    matrices (the label-free component of the combination).
    ``predicted_label`` applies the training formula with a provisional
    +/-1 label substituted for each test point.
    """
    cfg = cfg or CombinerConfig()
    mats = [np.asarray(R, dtype=np.float64) for R in cross_grams]
    if len(mats) == 0:
        raise ValueError("need at least one cross-Gram matrix")
    shape = mats[0].shape
    for M in mats:
        if M.shape != shape:
            raise ValueError(f"cross-Gram shapes differ: {M.shape} vs {shape}")
    if shape[1] != y_train.n:
        raise ValueError(f"cross-Gram has {shape[1]} columns for {y_train.n} training labels")
    kbar = sum(mats) / len(mats)
    if cfg.test_eval_mode == "average_fallback" or len(mats) == 1:
        return kbar
    if provisional_labels is None:
        raise ValueError("predicted_label mode requires provisional labels")
    yhat = np.asarray(provisional_labels)
    if yhat.shape != (shape[0],):
        raise ValueError(f"expected {shape[0]} provisional labels, got shape {yhat.shape}")
    if not np.all(np.isin(yhat, (-1, 1))):
        raise ValueError("provisional labels must all be -1 or +1")
    sign = np.outer(yhat.astype(np.float64), y_train.signs())
    return kbar + sign * _g_correction(mats, kbar, cfg)
