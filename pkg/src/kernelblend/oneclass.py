"""One-class SVM for high-density-region estimation, and the order LP.

The order problem picks out the nu*n sample points with the smallest
scores under any scoring function g:

    maximize   -sum_i lam_i g_i
    subject to sum_i lam_i == 1,  0 <= lam_i <= 1/(nu n)

Its linear-programming dual is

    minimize   -b + sum_i xi_i / (nu n)
    subject to g_i >= b - xi_i,  xi_i >= 0

Both are solved in closed form by sorting, and the pair serves as a
strong-duality oracle: their optimal values must coincide. The one-class
SVM solves the same selection problem with g estimated in feature space,
which is why its decision scores feed `solve_order_lp` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .kernels import GramMatrix, KernelSpec, gram_matrix
from .qp import DEFAULT_CONFIG, ConvergenceError, DualSolution, SolverConfig, oneclass_box, solve_oneclass_dual

SUPPORT_EPS_FACTOR = 1e-8


@dataclass
class OneClassModel:
    """Trained one-class estimator: coefficients over the training sample."""

    alpha: np.ndarray
    offset_b: float
    nu: float
    support_indices: np.ndarray
    solution: DualSolution | None = field(default=None, repr=False, compare=False)


def train_oneclass_gram(
    G,
    nu: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    backend: str = "auto",
) -> OneClassModel:
    """Train from a precomputed Gram matrix."""
    sol = solve_oneclass_dual(G, nu, cfg, backend=backend)
    if not sol.converged:
        raise ConvergenceError(
            f"SMO did not converge within {cfg.max_iterations} iterations "
            f"(residual {sol.kkt_residual:.3e})"
        )
    n = sol.alpha.shape[0]
    cap, _ = oneclass_box(nu, n)
    support = np.flatnonzero(sol.alpha > SUPPORT_EPS_FACTOR * cap)
    return OneClassModel(
        alpha=sol.alpha,
        offset_b=sol.offset_b,
        nu=float(nu),
        support_indices=support,
        solution=sol,
    )


def train_oneclass(
    X,
    kernel: KernelSpec,
    nu: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    backend: str = "auto",
) -> OneClassModel:
    """Fit the high-density-region estimator to a sample."""
    return train_oneclass_gram(gram_matrix(kernel, X), nu, cfg, backend=backend)


def oc_score(model: OneClassModel, k_row) -> float:
    """Decision score sum_i alpha_i K(x_i, x) - b; >= 0 inside the region."""
    k_row = np.asarray(k_row, dtype=np.float64).reshape(-1)
    if k_row.shape[0] != model.alpha.shape[0]:
        raise ValueError(f"expected {model.alpha.shape[0]} kernel values, got {k_row.shape[0]}")
    return float(model.alpha @ k_row) - model.offset_b


def oc_decision(model: OneClassModel, k_row) -> int:
    """+1 inside the estimated high-density region, -1 outside; sign(0) is +1."""
    return 1 if oc_score(model, k_row) >= 0.0 else -1


def oc_scores(model: OneClassModel, rows: np.ndarray) -> np.ndarray:
    """Batch scores for kernel rows against the training sample."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.alpha.shape[0]:
        raise ValueError(f"expected rows of width {model.alpha.shape[0]}, got shape {rows.shape}")
    return rows @ model.alpha - model.offset_b


@dataclass
class OrderSolution:
    """Solution of the order problem. `lam` carries the selection mass."""

    lam: np.ndarray
    b_star: float
    objective: float


class OrderDualSolution(NamedTuple):
    b: float
    xi: np.ndarray
    objective: float


def _effective_mass(nu: float, n: int) -> tuple[float, int, float]:
    """(nu*n, number of full-cap coordinates, leftover mass).

    nu*n within 1e-9 of an integer is treated as that integer, so e.g.
    nu=0.3, n=10 does not leak a stray 1e-16 of mass to an 11th point.
    """
    if not 0 < nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    t = nu * n
    if t < 1 - 1e-9:
        raise ValueError(f"infeasible nu: nu*n = {t:.6g} < 1 cannot carry unit mass")
    nearest = round(t)
    if abs(t - nearest) <= 1e-9:
        t = float(nearest)
    k = int(np.floor(t))
    cap = 1.0 / t
    remainder = 1.0 - k * cap
    if remainder <= 1e-12 or k == n:
        remainder = 0.0
    return t, k, remainder


def _stable_order(g: np.ndarray) -> np.ndarray:
    # stable sort: ties keep original index order
    return np.argsort(g, kind="stable")


def solve_order_lp(g_values, nu: float) -> OrderSolution:
    """Closed-form primal: cap mass on the floor(nu n) smallest scores,
    the leftover on the next smallest.

    `b_star` is the score at the last positive-mass position (the
    ceil(nu n)-th smallest); for integer nu*n the dual optimum is the whole
    interval between consecutive order statistics and this convention picks
    its lower end deterministically.
    """
    g = np.asarray(g_values, dtype=np.float64).reshape(-1)
    n = g.shape[0]
    if n == 0:
        raise ValueError("need at least one score")
    t, k, remainder = _effective_mass(nu, n)
    cap = 1.0 / t
    order = _stable_order(g)
    lam = np.zeros(n)
    lam[order[:k]] = cap
    last = k - 1
    if remainder > 0.0:
        lam[order[k]] = remainder
        last = k
    b_star = float(g[order[last]])
    objective = -float(lam @ g)
    return OrderSolution(lam=lam, b_star=b_star, objective=objective)


def solve_order_dual(g_values, nu: float) -> OrderDualSolution:
    """Closed-form dual: threshold b at the ceil(nu n)-th smallest score."""
    g = np.asarray(g_values, dtype=np.float64).reshape(-1)
    n = g.shape[0]
    if n == 0:
        raise ValueError("need at least one score")
    t, k, remainder = _effective_mass(nu, n)
    cap = 1.0 / t
    order = _stable_order(g)
    last = k if remainder > 0.0 else k - 1
    b = float(g[order[last]])
    xi = np.maximum(0.0, b - g)
    objective = -b + cap * float(np.sum(xi))
    return OrderDualSolution(b=b, xi=xi, objective=objective)
