"""Kernel evaluation, Gram matrix construction, and PSD repair.

Supported kernel families:

* ``linear``       K(x, z) = x.z
* ``polynomial``   K(x, z) = (offset + x.z)**degree
* ``gaussian``     K(x, z) = exp(-||x - z||^2 / c)
* ``precomputed``  no closed form; the Gram matrix is supplied externally

Batch and scalar evaluation share one code path (`_eval_rows`) built from
elementwise multiply + per-row `np.sum`, so a Gram entry is bit-identical
to the corresponding single-pair evaluation. BLAS matmul is deliberately
avoided here: its accumulation order depends on the operand shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

LINEAR = "linear"
POLYNOMIAL = "polynomial"
GAUSSIAN = "gaussian"
PRECOMPUTED = "precomputed"

FAMILIES = (LINEAR, POLYNOMIAL, GAUSSIAN, PRECOMPUTED)

#: provenance tags for GramMatrix
SINGLE_KERNEL = "single_kernel"
COMBINED = "combined"
REPAIRED = "repaired"

_SPEC_ALIASES = {
    "linear": LINEAR,
    "poly": POLYNOMIAL,
    "polynomial": POLYNOMIAL,
    "gauss": GAUSSIAN,
    "gaussian": GAUSSIAN,
    "precomputed": PRECOMPUTED,
}


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of a kernel function.

    Parameters irrelevant to the family are ignored (and not serialized).
    ``source`` is only meaningful for ``precomputed`` specs, where it names
    the file holding the externally supplied Gram matrix.
    """

    family: str
    degree: int = 2
    offset: float = 1.0
    width_c: float = 1.0
    source: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == POLYNOMIAL:
            if not isinstance(self.degree, int) or self.degree < 1:
                raise ValueError(f"polynomial degree must be a positive integer, got {self.degree!r}")
        if self.family == GAUSSIAN and not self.width_c > 0:
            raise ValueError(f"gaussian width must be positive, got {self.width_c!r}")

    def to_string(self) -> str:
        """Serialize to the plain-text config form, e.g. ``poly:degree=2,offset=1.0``."""
        if self.family == LINEAR:
            return "linear"
        if self.family == POLYNOMIAL:
            return f"poly:degree={self.degree},offset={self.offset!r}"
        if self.family == GAUSSIAN:
            return f"gauss:c={self.width_c!r}"
        return f"precomputed:{self.source or ''}"

    @classmethod
    def from_string(cls, text: str) -> "KernelSpec":
        """Parse the plain-text config form.

        Accepted: ``linear``, ``poly:degree=2,offset=1``, ``gauss:c=1``,
        ``precomputed:<path>``.
        """
        text = text.strip()
        head, _, rest = text.partition(":")
        family = _SPEC_ALIASES.get(head.lower())
        if family is None:
            raise ValueError(f"unknown kernel family in spec string {text!r}")
        if family == LINEAR:
            if rest:
                raise ValueError(f"linear kernel takes no parameters: {text!r}")
            return cls(LINEAR)
        if family == PRECOMPUTED:
            return cls(PRECOMPUTED, source=rest or None)
        params = {}
        if rest:
            for item in rest.split(","):
                key, sep, value = item.partition("=")
                if not sep:
                    raise ValueError(f"malformed parameter {item!r} in {text!r}")
                params[key.strip()] = value.strip()
        if family == POLYNOMIAL:
            degree = int(params.pop("degree", 2))
            offset = float(params.pop("offset", 1.0))
            if params:
                raise ValueError(f"unknown polynomial parameters {sorted(params)} in {text!r}")
            return cls(POLYNOMIAL, degree=degree, offset=offset)
        width = float(params.pop("c", 1.0))
        if params:
            raise ValueError(f"unknown gaussian parameters {sorted(params)} in {text!r}")
        return cls(GAUSSIAN, width_c=width)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric matrix of pairwise kernel evaluations.

    ``entries`` is locked read-only on construction; a GramMatrix is safe
    to share across threads.
    """

    entries: np.ndarray
    provenance: str = SINGLE_KERNEL

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"Gram matrix must be square, got shape {entries.shape}")
        if not np.array_equal(entries, entries.T):
            raise ValueError("Gram matrix entries are not symmetric")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def with_entries(self, entries: np.ndarray, provenance: str) -> "GramMatrix":
        return replace(self, entries=entries, provenance=provenance)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d sample matrix, got ndim={X.ndim}")
    return X


def _eval_rows(spec: KernelSpec, X: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Kernel values of every row of X against the single point z."""
    if spec.family == LINEAR:
        return np.sum(X * z, axis=1)
    if spec.family == POLYNOMIAL:
        return (spec.offset + np.sum(X * z, axis=1)) ** spec.degree
    if spec.family == GAUSSIAN:
        diff = X - z
        return np.exp(-np.sum(diff * diff, axis=1) / spec.width_c)
    raise ValueError("precomputed kernels have no closed form to evaluate")


def eval_kernel(spec: KernelSpec, x, z) -> float:
    """Evaluate K(x, z) for a single pair of points."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    return float(_eval_rows(spec, z.reshape(1, -1), x)[0])


def gram_matrix(spec: KernelSpec, X) -> GramMatrix:
    """Gram matrix of X against itself.

    The upper triangle is computed; the lower triangle is mirrored by copy,
    never recomputed, so symmetry holds bit-exactly.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 1:
        raise ValueError("cannot build a Gram matrix from an empty sample")
    G = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        G[i, i:] = _eval_rows(spec, X[i:], X[i])
    lower = np.tril_indices(n, -1)
    G[lower] = G[(lower[1], lower[0])]
    return GramMatrix(G)


def cross_gram(spec: KernelSpec, X_train, X_test) -> np.ndarray:
    """Matrix of kernel values: row t, column i holds K(x_test[t], x_train[i])."""
    X_train = _as_matrix(X_train)
    X_test = _as_matrix(X_test)
    if X_train.shape[1] != X_test.shape[1]:
        raise ValueError(
            f"dimension mismatch: train has {X_train.shape[1]} features, test has {X_test.shape[1]}"
        )
    R = np.empty((X_test.shape[0], X_train.shape[0]), dtype=np.float64)
    for t in range(X_test.shape[0]):
        R[t] = _eval_rows(spec, X_train, X_test[t])
    return R


def load_precomputed_gram(path: str) -> GramMatrix:
    """Read an externally supplied Gram matrix from a delimited text file."""
    entries = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if entries.shape[0] != entries.shape[1]:
        raise ValueError(f"precomputed Gram in {path!r} is not square: {entries.shape}")
    scale = max(1.0, float(np.max(np.abs(entries))))
    if np.max(np.abs(entries - entries.T)) > 1e-8 * scale:
        raise ValueError(f"precomputed Gram in {path!r} is not symmetric")
    entries = (entries + entries.T) / 2.0
    return GramMatrix(entries)


PSD_MODES = ("none", "diagonal_shift", "spectral_clip")


def psd_repair(G: GramMatrix, mode: str = "diagonal_shift", tol: float = 1e-10) -> GramMatrix:
    """Return a positive-semidefinite version of G.

    ``none``: G unchanged. ``diagonal_shift``: add (|lambda_min| + tol) to the
    diagonal when lambda_min < -tol. ``spectral_clip``: zero all eigenvalues
    below -tol and reassemble. Unmodified inputs are returned as-is; modified
    ones carry ``repaired`` provenance.
    """
    if mode not in PSD_MODES:
        raise ValueError(f"unknown psd repair mode {mode!r}")
    if mode == "none":
        return G
    entries = G.entries
    if not np.all(np.isfinite(entries)):
        raise ValueError("cannot eigendecompose a Gram matrix with non-finite entries")
    if mode == "diagonal_shift":
        lam_min = float(np.linalg.eigvalsh(entries)[0])
        if lam_min >= -tol:
            return G
        shifted = entries + (abs(lam_min) + tol) * np.eye(G.n)
        return G.with_entries(shifted, REPAIRED)
    # spectral_clip
    w, V = np.linalg.eigh(entries)
    if w[0] >= -tol:
        return G
    w = np.where(w < -tol, 0.0, w)
    rebuilt = (V * w) @ V.T
    rebuilt = (rebuilt + rebuilt.T) / 2.0  # dgemm output is not exactly symmetric
    return G.with_entries(rebuilt, REPAIRED)
