# Compiled SMO core. Must stay operation-for-operation identical to
# _smo_py.run_smo: the build disables FP contraction so both backends
# produce bit-identical iterates.

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1


@cython.boundscheck(False)
@cython.wraparound(False)
def run_smo(
    double[:, ::1] Q,
    double[::1] s,
    double[::1] lo,
    double[::1] hi,
    double[::1] alpha,
    double[::1] grad,
    double kkt_tol,
    long max_iter,
    double tau,
):
    """Maximal-violating-pair loop; mutates alpha and grad in place.

    Returns (status, iterations, final_violation).
    """
    cdef Py_ssize_t n = alpha.shape[0]
    cdef Py_ssize_t t, i, j, k
    cdef long it = 0
    cdef double crit, m_val, M_val, violation
    cdef double si, sj, g_dir, eta, cap_i, cap_j, t_max, step
    cdef double new_i, new_j, delta_i, delta_j
    cdef double inf = float("inf")
    cdef bint movable

    while True:
        m_val = -inf
        M_val = inf
        i = -1
        j = -1
        for t in range(n):
            crit = -s[t] * grad[t]
            if s[t] > 0:
                movable = alpha[t] < hi[t]
            else:
                movable = alpha[t] > lo[t]
            if movable and crit > m_val:
                m_val = crit
                i = t
            if s[t] > 0:
                movable = alpha[t] > lo[t]
            else:
                movable = alpha[t] < hi[t]
            if movable and crit < M_val:
                M_val = crit
                j = t
        violation = m_val - M_val
        if not violation > kkt_tol:
            return STATUS_CONVERGED, it, violation
        if it >= max_iter:
            return STATUS_MAX_ITER, it, violation

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
            step = -g_dir / eta
            if step > t_max:
                step = t_max
        else:
            step = t_max
        new_i = alpha[i] + si * step
        new_j = alpha[j] - sj * step
        if step == cap_i:
            new_i = hi[i] if si > 0 else lo[i]
        if step == cap_j:
            new_j = lo[j] if sj > 0 else hi[j]
        delta_i = new_i - alpha[i]
        delta_j = new_j - alpha[j]
        alpha[i] = new_i
        alpha[j] = new_j
        for k in range(n):
            grad[k] += delta_i * Q[i, k] + delta_j * Q[j, k]
        it += 1
