"""Pure-numpy SMO core: the import-time fallback for the compiled loop.

This mirrors `_smo_core.pyx` operation-for-operation. Every floating-point
expression here must stay token-identical to the compiled version (and the
extension is built with FP contraction off), so the two backends produce
bit-identical iterates.

Problem form, with s_i in {-1, +1}:

    minimize   alpha' Q alpha / 2 + p' alpha
    subject to sum_i s_i alpha_i  ==  constant,   lo <= alpha <= hi

`alpha` must be feasible on entry. `alpha` and `grad` (= Q @ alpha + p)
are updated in place.
"""

from __future__ import annotations

import numpy as np

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1


def run_smo(
    Q: np.ndarray,
    s: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    alpha: np.ndarray,
    grad: np.ndarray,
    kkt_tol: float,
    max_iter: int,
    tau: float,
    objective_trace: list | None = None,
    p: np.ndarray | None = None,
) -> tuple[int, int, float]:
    """Run maximal-violating-pair updates until the KKT gap closes.

    Returns (status, iterations, final_violation). `objective_trace`, when
    given, records the objective after every pair step (needs `p`; test
    instrumentation only, not available in the compiled core).
    """
    neg_s = -s
    it = 0
    violation = np.inf
    while True:
        # Working-set selection. I_up collects coordinates whose feasible
        # move increases s_i * alpha_i, I_low the opposite; the maximal
        # violating pair is (argmax, argmin) of -s*grad over the two sets.
        # np.argmax/argmin take the first (lowest-index) extremum on ties.
        crit = neg_s * grad
        movable_up = np.where(s > 0, alpha < hi, alpha > lo)
        movable_dn = np.where(s > 0, alpha > lo, alpha < hi)
        up_crit = np.where(movable_up, crit, -np.inf)
        dn_crit = np.where(movable_dn, crit, np.inf)
        i = int(np.argmax(up_crit))
        j = int(np.argmin(dn_crit))
        m_val = up_crit[i]
        M_val = dn_crit[j]
        violation = m_val - M_val
        if not violation > kkt_tol:  # also catches empty sets (-inf gap)
            return STATUS_CONVERGED, it, float(violation)
        if it >= max_iter:
            return STATUS_MAX_ITER, it, float(violation)

        # Analytic step along d = s_i e_i - s_j e_j (keeps the equality
        # constraint). The directional derivative is -violation < 0.
        si = s[i]
        sj = s[j]
        g_dir = si * grad[i] - sj * grad[j]
        eta = Q[i, i] + Q[j, j] - 2.0 * si * sj * Q[i, j]
        if si > 0:
            cap_i = hi[i] - alpha[i]
        else:
            cap_i = alpha[i] - lo[i]
        if sj > 0:
            cap_j = alpha[j] - lo[j]
        else:
            cap_j = hi[j] - alpha[j]
        t_max = cap_i if cap_i < cap_j else cap_j
        if eta > tau:
            t = -g_dir / eta
            if t > t_max:
                t = t_max
        else:
            # Nonconvex or flat direction: the objective is concave/linear
            # along d, so the minimum over the segment is at the far end.
            t = t_max
        new_i = alpha[i] + si * t
        new_j = alpha[j] - sj * t
        if t == cap_i:
            new_i = hi[i] if si > 0 else lo[i]
        if t == cap_j:
            new_j = lo[j] if sj > 0 else hi[j]
        delta_i = new_i - alpha[i]
        delta_j = new_j - alpha[j]
        alpha[i] = new_i
        alpha[j] = new_j
        grad += delta_i * Q[i] + delta_j * Q[j]
        it += 1
        if objective_trace is not None:
            objective_trace.append(0.5 * float(alpha @ Q @ alpha) + float(p @ alpha))
