"""Dual quadratic programs: SMO working-set solver plus a brute-force oracle.

Canonical problem (`BoxQP`):

    minimize   alpha' Q alpha / 2 + linear' alpha
    subject to coeffs' alpha == rhs   (optional single equality)
               lower <= alpha <= upper

Two instantiations matter here: the two-class soft-margin dual
(`solve_csvm_dual`) and the one-class dual (`solve_oneclass_dual`). Both
are solved by maximal-violating-pair SMO with a compiled inner loop when
the extension built (`solver_backends()` reports what is available); the
pure-numpy fallback produces bit-identical results.

`brute_force_qp` enumerates active sets exhaustively and is the
independent correctness oracle for small instances.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from . import _smo_py
from .kernels import GramMatrix

try:
    from . import _smo_core
except ImportError:  # extension not built; fall back to pure numpy
    _smo_core = None

log = logging.getLogger(__name__)

#: threshold below which the pair curvature is treated as non-positive
CURVATURE_TAU = 1e-12


class ConvergenceError(RuntimeError):
    """Raised by callers that require a converged solve (see `DualSolution.converged`)."""


def solver_backends() -> tuple[str, ...]:
    """Names of the available SMO cores, preferred first."""
    return ("compiled", "python") if _smo_core is not None else ("python",)


def _resolve_backend(backend: str):
    if backend == "auto":
        backend = "compiled" if _smo_core is not None else "python"
    if backend == "compiled":
        if _smo_core is None:
            raise ValueError("compiled solver core is not available in this install")
        return _smo_core, "compiled"
    if backend == "python":
        return _smo_py, "python"
    raise ValueError(f"unknown solver backend {backend!r}")


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules for the SMO solver."""

    kkt_tol: float = 1e-3
    max_iterations: int = 10_000_000
    objective_tol: float = 1e-12

    def __post_init__(self):
        if self.kkt_tol <= 0 or self.max_iterations <= 0 or self.objective_tol <= 0:
            raise ValueError("all solver tolerances must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass
class BoxQP:
    """A box-constrained QP with at most one linear equality constraint."""

    Q: np.ndarray
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    equality: tuple[np.ndarray, float] | None = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=np.float64)
        n = self.Q.shape[0]
        if self.Q.shape != (n, n):
            raise ValueError("Q must be square")
        scale = max(1.0, float(np.max(np.abs(self.Q)))) if n else 1.0
        if n and np.max(np.abs(self.Q - self.Q.T)) > 1e-10 * scale:
            raise ValueError("Q must be symmetric")
        self.linear = np.broadcast_to(np.asarray(self.linear, dtype=np.float64), (n,)).copy()
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if self.equality is not None:
            coeffs, rhs = self.equality
            coeffs = np.broadcast_to(np.asarray(coeffs, dtype=np.float64), (n,)).copy()
            self.equality = (coeffs, float(rhs))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def objective(self, alpha: np.ndarray) -> float:
        return 0.5 * float(alpha @ self.Q @ alpha) + float(self.linear @ alpha)


@dataclass
class DualSolution:
    """Solver output. `objective` is the minimized canonical value.

    `offset_b` holds the recovered decision offset for the SVM duals and
    0.0 for raw `brute_force_qp` solves (the oracle does not interpret the
    problem). `kkt_residual` comes from the independent post-solve scan,
    not the solver's internal bookkeeping.
    """

    alpha: np.ndarray
    offset_b: float
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class KktCertificate:
    """Result of the independent post-solve feasibility + stationarity scan."""

    stationarity_gap: float
    box_violation: float
    equality_violation: float
    kkt_tol: float
    feas_tol: float

    @property
    def passed(self) -> bool:
        return (
            self.stationarity_gap <= self.kkt_tol
            and self.box_violation <= self.feas_tol
            and self.equality_violation <= self.feas_tol
        )


def kkt_certificate(problem: BoxQP, alpha: np.ndarray, kkt_tol: float) -> KktCertificate:
    """Scan KKT conditions from scratch (fresh gradient, no solver state).

    Stationarity for equality-constrained problems is the maximal-violating-
    pair gap m(alpha) - M(alpha); without an equality constraint it is the
    largest per-coordinate gradient sign violation. Feasibility tolerances
    scale with the data so the certificate is meaningful at any magnitude.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    grad = problem.Q @ alpha + problem.linear
    scale = max(1.0, float(np.sum(np.abs(alpha))))
    feas_tol = 1e-12 * scale
    box_violation = float(
        np.max(np.maximum(problem.lower - alpha, alpha - problem.upper).clip(min=0.0), initial=0.0)
    )
    bound_tol = 1e-9 * max(1.0, float(np.max(problem.upper - problem.lower, initial=0.0)))
    at_lo = alpha <= problem.lower + bound_tol
    at_hi = alpha >= problem.upper - bound_tol
    if problem.equality is None:
        equality_violation = 0.0
        # free: grad == 0; at lower: grad >= 0; at upper: grad <= 0
        gap = np.abs(np.where(~at_lo & ~at_hi, grad, 0.0))
        gap = np.maximum(gap, np.where(at_lo, np.maximum(-grad, 0.0), 0.0))
        gap = np.maximum(gap, np.where(at_hi, np.maximum(grad, 0.0), 0.0))
        stationarity = float(np.max(gap, initial=0.0))
    else:
        coeffs, rhs = problem.equality
        equality_violation = abs(float(coeffs @ alpha) - rhs)
        s = np.sign(coeffs)
        crit = -s * grad
        movable_up = np.where(s > 0, ~at_hi, ~at_lo)
        movable_dn = np.where(s > 0, ~at_lo, ~at_hi)
        m = np.max(np.where(movable_up, crit, -np.inf), initial=-np.inf)
        M = np.min(np.where(movable_dn, crit, np.inf), initial=np.inf)
        stationarity = float(max(m - M, 0.0)) if np.isfinite(m - M) else 0.0
    return KktCertificate(stationarity, box_violation, equality_violation, kkt_tol, feas_tol)


def _cleanup(problem: BoxQP, alpha: np.ndarray):
    """Snap near-bound coordinates exactly and absorb equality drift.

    Pair updates keep the equality constraint only to rounding; the
    accumulated drift is pushed into the freest coordinate.
    """
    lo, hi = problem.lower, problem.upper
    snap = 1e-10 * np.maximum(1.0, hi - lo)
    alpha[:] = np.where(alpha - lo <= snap, lo, alpha)
    alpha[:] = np.where(hi - alpha <= snap, hi, alpha)
    if problem.equality is None:
        return
    coeffs, rhs = problem.equality
    drift = float(coeffs @ alpha) - rhs
    if drift == 0.0:
        return
    slack = np.minimum(alpha - lo, hi - alpha)
    k = int(np.argmax(slack))
    if slack[k] > abs(drift):
        alpha[k] -= drift / coeffs[k]


def solve_smo(
    problem: BoxQP,
    alpha0: np.ndarray,
    cfg: SolverConfig = DEFAULT_CONFIG,
    backend: str = "auto",
    objective_trace: list | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Run the SMO core from a feasible start; returns (alpha, iterations, converged).

    Requires an equality constraint with +/-1 coefficients (both SVM duals
    have one). `objective_trace` forces the python backend.
    """
    if problem.equality is None:
        raise ValueError("the SMO solver requires an equality constraint")
    coeffs, _ = problem.equality
    if not np.all(np.abs(coeffs) == 1.0):
        raise ValueError("SMO requires equality coefficients in {-1, +1}")
    core, name = _resolve_backend(backend)
    Q = np.ascontiguousarray(problem.Q)
    alpha = np.array(alpha0, dtype=np.float64)
    grad = Q @ alpha + problem.linear
    if objective_trace is not None:
        if name != "python":
            raise ValueError("objective tracing is only supported by the python backend")
        status, iterations, _ = _smo_py.run_smo(
            Q, coeffs, problem.lower, problem.upper, alpha, grad,
            cfg.kkt_tol, cfg.max_iterations, CURVATURE_TAU,
            objective_trace=objective_trace, p=problem.linear,
        )
    else:
        status, iterations, _ = core.run_smo(
            Q, coeffs, problem.lower, problem.upper, alpha, grad,
            cfg.kkt_tol, cfg.max_iterations, CURVATURE_TAU,
        )
    _cleanup(problem, alpha)
    return alpha, iterations, status == _smo_py.STATUS_CONVERGED


def _interval_offset(low_candidates: np.ndarray, high_candidates: np.ndarray) -> float:
    """Deterministic point of the optimal-offset interval [max(low), min(high)].

    Midpoint when both ends exist; the finite end when only one does.
    """
    lo = float(np.max(low_candidates)) if low_candidates.size else -np.inf
    hi = float(np.min(high_candidates)) if high_candidates.size else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


def solve_csvm_dual(
    G,
    y,
    C: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    backend: str = "auto",
) -> DualSolution:
    """Soft-margin two-class dual over Gram matrix G with labels y.

    Maximizes sum(alpha) - alpha' (yy' * G) alpha / 2 subject to
    y'alpha == 0 and 0 <= alpha <= C; stored `objective` is the minimized
    canonical form (the negative of the maximum). The offset is recovered
    from margin support vectors, or from the midpoint of the KKT-feasible
    interval when every alpha is at a bound.
    """
    K = G.entries if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    yv = np.asarray(getattr(y, "y", y), dtype=np.float64).reshape(-1)
    n = yv.shape[0]
    if K.shape != (n, n):
        raise ValueError(f"Gram matrix shape {K.shape} does not match {n} labels")
    if not np.all(np.isin(yv, (-1.0, 1.0))):
        raise ValueError("labels must all be -1 or +1")
    if np.all(yv == yv[0]):
        raise ValueError("both classes are required: the equality constraint is degenerate")
    if not C > 0:
        raise ValueError("C must be positive")
    problem = BoxQP(
        Q=K * np.outer(yv, yv),
        linear=-np.ones(n),
        lower=np.zeros(n),
        upper=np.full(n, float(C)),
        equality=(yv.copy(), 0.0),
    )
    alpha, iterations, converged = solve_smo(problem, np.zeros(n), cfg, backend)
    # decision offset: for margin SVs y_i * (s_i + b) == 1 with s = G (alpha*y)
    sv_scores = K @ (alpha * yv)
    v = yv - sv_scores
    margin = (alpha > problem.lower) & (alpha < problem.upper)
    if np.any(margin):
        b = float(np.mean(v[margin]))
    else:
        at_lo = alpha <= problem.lower
        at_hi = alpha >= problem.upper
        b = _interval_offset(
            v[(at_lo & (yv > 0)) | (at_hi & (yv < 0))],
            v[(at_lo & (yv < 0)) | (at_hi & (yv > 0))],
        )
    cert = kkt_certificate(problem, alpha, cfg.kkt_tol)
    return DualSolution(
        alpha=alpha,
        offset_b=b,
        objective=problem.objective(alpha),
        kkt_residual=cert.stationarity_gap,
        iterations=iterations,
        converged=converged,
    )


def oneclass_box(nu: float, n: int) -> tuple[float, float]:
    """Validate nu and return (upper bound 1/(nu*n), total mass 1)."""
    if not 0 < nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    if nu * n < 1:
        raise ValueError(f"infeasible nu: nu*n = {nu * n:.6g} < 1 cannot carry unit mass")
    return 1.0 / (nu * n), 1.0


def solve_oneclass_dual(
    G,
    nu: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    backend: str = "auto",
) -> DualSolution:
    """One-class dual: minimize alpha' G alpha / 2, sum(alpha) == 1, 0 <= alpha <= 1/(nu n).

    The offset is the mean of (G alpha)_i over margin support vectors
    (interval rule otherwise, as for the two-class dual).
    """
    K = G.entries if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    n = K.shape[0]
    cap, mass = oneclass_box(nu, n)
    problem = BoxQP(
        Q=K.copy(),
        linear=np.zeros(n),
        lower=np.zeros(n),
        upper=np.full(n, cap),
        equality=(np.ones(n), mass),
    )
    # feasible start: fill coordinates at the cap until the mass is placed
    alpha0 = np.zeros(n)
    k = int(mass / cap)  # floor(nu * n)
    alpha0[:k] = cap
    if k < n:
        alpha0[k] = mass - k * cap
    alpha, iterations, converged = solve_smo(problem, alpha0, cfg, backend)
    scores = K @ alpha
    margin = (alpha > problem.lower) & (alpha < problem.upper)
    if np.any(margin):
        b = float(np.mean(scores[margin]))
    else:
        b = _interval_offset(scores[alpha >= problem.upper], scores[alpha <= problem.lower])
    cert = kkt_certificate(problem, alpha, cfg.kkt_tol)
    return DualSolution(
        alpha=alpha,
        offset_b=b,
        objective=problem.objective(alpha),
        kkt_residual=cert.stationarity_gap,
        iterations=iterations,
        converged=converged,
    )


BRUTE_FORCE_MAX_N = 16


def brute_force_qp(problem: BoxQP, kkt_tol: float = DEFAULT_CONFIG.kkt_tol) -> DualSolution:
    """Exhaustive active-set enumeration; exact up to linear-solve error.

    Every split of the coordinates into {free, at-lower, at-upper} is
    visited; the stationarity system for the free block is solved with all
    bound assignments batched as right-hand sides. The best box- and
    equality-feasible candidate wins. Exponential: n <= 16.
    """
    n = problem.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force enumeration is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    Q, p, lo, hi = problem.Q, problem.linear, problem.lower, problem.upper
    has_eq = problem.equality is not None
    if has_eq:
        coeffs, rhs = problem.equality
    box_tol = 1e-9 * max(1.0, float(np.max(np.abs(lo), initial=0.0)), float(np.max(np.abs(hi), initial=0.0)))
    eq_tol = 1e-9 * max(1.0, abs(rhs)) if has_eq else 0.0

    best_obj = np.inf
    best_alpha = None
    evaluated = 0
    skipped_singular = 0
    indices = np.arange(n)
    for free_size in range(n, -1, -1):
        for free in itertools.combinations(range(n), free_size):
            free = np.array(free, dtype=np.intp)
            active = np.setdiff1d(indices, free, assume_unique=True)
            m = active.size
            # all 2^m bound assignments, bit b of the code selecting upper for active[b]
            codes = np.arange(2 ** m, dtype=np.int64)
            picks = (codes[:, None] >> np.arange(m)) & 1
            values = np.where(picks == 1, hi[active], lo[active])  # (2^m, m)
            if free_size == 0:
                candidates = values
            else:
                # stationarity on the free block, with the bound assignments
                # batched as right-hand-side columns
                Qff = Q[np.ix_(free, free)]
                rhs_top = -p[free][:, None] - Q[np.ix_(free, active)] @ values.T
                if has_eq:
                    kkt = np.zeros((free_size + 1, free_size + 1))
                    kkt[:free_size, :free_size] = Qff
                    kkt[:free_size, free_size] = coeffs[free]
                    kkt[free_size, :free_size] = coeffs[free]
                    rhs_bottom = rhs - values @ coeffs[active]
                    rhs_all = np.vstack([rhs_top, rhs_bottom[None, :]])
                else:
                    kkt = Qff
                    rhs_all = rhs_top
                try:
                    sol = np.linalg.solve(kkt, rhs_all)
                except np.linalg.LinAlgError:
                    skipped_singular += 1
                    continue
                free_vals = sol[:free_size].T  # (n_assignments, free_size)
                if not np.all(np.isfinite(free_vals)):
                    skipped_singular += 1
                    continue
                candidates = np.empty((free_vals.shape[0], n))
                candidates[:, free] = free_vals
                candidates[:, active] = values
            ok = np.all(
                (candidates >= lo - box_tol) & (candidates <= hi + box_tol), axis=1
            )
            if has_eq and free_size == 0:
                ok &= np.abs(candidates @ coeffs - rhs) <= eq_tol
            if not np.any(ok):
                continue
            cand = np.clip(candidates[ok], lo, hi)
            objs = 0.5 * np.einsum("ij,ij->i", cand @ Q, cand) + cand @ p
            evaluated += cand.shape[0]
            best_local = int(np.argmin(objs))
            if objs[best_local] < best_obj:
                best_obj = float(objs[best_local])
                best_alpha = cand[best_local].copy()
    if best_alpha is None:
        raise ValueError("no feasible candidate found (inconsistent constraints?)")
    if skipped_singular:
        log.debug("brute_force_qp skipped %d singular stationarity systems", skipped_singular)
    cert = kkt_certificate(problem, best_alpha, kkt_tol)
    return DualSolution(
        alpha=best_alpha,
        offset_b=0.0,
        objective=best_obj,
        kkt_residual=cert.stationarity_gap,
        iterations=evaluated,
        converged=True,
    )
