"""Two-class SVM training and evaluation over single or combined kernels.

A trained model keeps only what the decision function needs: the support
set, the signed coefficients alpha_i * y_i, the offset, and (when the
kernel has a closed form) the support points themselves. Gram matrices
are supplied by the caller, so the same trainer serves plain kernels,
precomputed matrices, and label-aware combinations.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramMatrix
from .qp import DEFAULT_CONFIG, ConvergenceError, DualSolution, SolverConfig, solve_csvm_dual

SUPPORT_EPS_FACTOR = 1e-8  # alpha_i > factor * C counts as a support vector


@dataclass
class SvmModel:
    """Dual solution of a two-class SVM, reduced to its support set."""

    support_indices: np.ndarray
    alpha_y: np.ndarray
    offset_b: float
    kernel: str
    train_refs: np.ndarray | None
    n_train: int
    C: float
    solution: DualSolution | None = field(default=None, repr=False, compare=False)

    @property
    def n_support(self) -> int:
        return int(self.support_indices.shape[0])

    @property
    def sv_percent(self) -> float:
        return 100.0 * self.n_support / self.n_train


def train(
    train_ds,
    G,
    C: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    kernel_label: str = "precomputed:",
    backend: str = "auto",
) -> SvmModel:
    """Train on a dataset whose Gram matrix G has already been computed.

    Raises ConvergenceError when the solver hits its iteration budget; a
    harness treats that as a failed run rather than reporting from a
    non-certified iterate.
    """
    y = np.asarray(train_ds.y)
    K = G.entries if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    if np.all(y == y[0]):
        raise ValueError("training data contains a single class")
    if K.shape[0] != y.shape[0]:
        raise ValueError(f"Gram matrix size {K.shape[0]} does not match {y.shape[0]} labels")
    sol = solve_csvm_dual(K, y, C, cfg, backend=backend)
    if not sol.converged:
        raise ConvergenceError(
            f"SMO did not converge within {cfg.max_iterations} iterations "
            f"(residual {sol.kkt_residual:.3e})"
        )
    support = np.flatnonzero(sol.alpha > SUPPORT_EPS_FACTOR * C)
    X = getattr(train_ds, "X", None)
    return SvmModel(
        support_indices=support,
        alpha_y=(sol.alpha * y)[support],
        offset_b=sol.offset_b,
        kernel=kernel_label,
        train_refs=None if X is None else np.array(X[support], dtype=np.float64),
        n_train=int(y.shape[0]),
        C=float(C),
        solution=sol,
    )


def decision_value(model: SvmModel, k_row) -> float:
    """sum_i alpha_y[i] * K(sv_i, x) + b for one point's kernel row."""
    k_row = np.asarray(k_row, dtype=np.float64).reshape(-1)
    if k_row.shape[0] != model.n_support:
        raise ValueError(f"expected {model.n_support} kernel values, got {k_row.shape[0]}")
    return float(model.alpha_y @ k_row) + model.offset_b


def predict(model: SvmModel, k_row) -> int:
    """Predicted label; sign(0) is defined as +1."""
    return 1 if decision_value(model, k_row) >= 0.0 else -1


def decision_values(model: SvmModel, rows: np.ndarray) -> np.ndarray:
    """Decision values for a batch of kernel rows against the full training set."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.n_train:
        raise ValueError(f"expected rows of width {model.n_train}, got shape {rows.shape}")
    return rows[:, model.support_indices] @ model.alpha_y + model.offset_b


def predict_batch(model: SvmModel, rows: np.ndarray) -> np.ndarray:
    return np.where(decision_values(model, rows) >= 0.0, 1, -1)


def evaluate(model: SvmModel, test_ds, test_rows) -> tuple[float, float]:
    """(error_percent, sv_percent) on a labeled set.

    `test_rows` holds kernel values of each test point against the full
    training set (row t, column i = K(test_t, train_i)).
    """
    y = np.asarray(test_ds.y)
    if y.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty test set")
    preds = predict_batch(model, test_rows)
    if preds.shape[0] != y.shape[0]:
        raise ValueError(f"{preds.shape[0]} rows for {y.shape[0]} test labels")
    error_percent = 100.0 * float(np.sum(preds != y)) / y.shape[0]
    return error_percent, model.sv_percent


FORMAT_TAG = "svm-model 1"


def model_to_text(model: SvmModel) -> str:
    """Versioned plain-text serialization (exact float round-trip via repr)."""
    out = io.StringIO()
    out.write(FORMAT_TAG + "\n")
    out.write(f"kernel {model.kernel}\n")
    out.write(f"C {model.C!r}\n")
    out.write(f"n_train {model.n_train}\n")
    out.write(f"offset_b {model.offset_b!r}\n")
    d = "none" if model.train_refs is None else str(model.train_refs.shape[1])
    out.write(f"refs {d}\n")
    out.write(f"support {model.n_support}\n")
    for k in range(model.n_support):
        parts = [str(int(model.support_indices[k])), repr(float(model.alpha_y[k]))]
        if model.train_refs is not None:
            parts.extend(repr(float(v)) for v in model.train_refs[k])
        out.write(" ".join(parts) + "\n")
    return out.getvalue()


def model_from_text(text: str) -> SvmModel:
    lines = text.strip("\n").split("\n")
    if not lines or lines[0] != FORMAT_TAG:
        raise ValueError(f"not a serialized model (expected header {FORMAT_TAG!r})")

    def take(idx, key):
        name, _, value = lines[idx].partition(" ")
        if name != key:
            raise ValueError(f"malformed model text: expected {key!r} on line {idx + 1}")
        return value

    kernel = take(1, "kernel")
    C = float(take(2, "C"))
    n_train = int(take(3, "n_train"))
    offset_b = float(take(4, "offset_b"))
    refs = take(5, "refs")
    n_support = int(take(6, "support"))
    body = lines[7 : 7 + n_support]
    if len(body) != n_support:
        raise ValueError(f"expected {n_support} support rows, found {len(body)}")
    d = None if refs == "none" else int(refs)
    indices = np.empty(n_support, dtype=np.intp)
    alpha_y = np.empty(n_support)
    train_refs = None if d is None else np.empty((n_support, d))
    for k, line in enumerate(body):
        parts = line.split()
        want = 2 + (d or 0)
        if len(parts) != want:
            raise ValueError(f"support row {k}: expected {want} fields, got {len(parts)}")
        indices[k] = int(parts[0])
        alpha_y[k] = float(parts[1])
        if train_refs is not None:
            train_refs[k] = [float(v) for v in parts[2:]]
    return SvmModel(
        support_indices=indices,
        alpha_y=alpha_y,
        offset_b=offset_b,
        kernel=kernel,
        train_refs=train_refs,
        n_train=n_train,
        C=C,
    )
