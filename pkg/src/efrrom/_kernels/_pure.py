"""Pure-python (numpy) kernel backend.

Mirrors the signatures of the compiled backend ``_core``; selected at import
time by :mod:`efrrom._kernels` when the extension is unavailable or when
``EFRROM_BACKEND=python`` is set. Rotation sweeps and tridiagonal recurrences
are inherently sequential, so this backend is noticeably slower than the
compiled core on large problems (see ``benchmarks/backend_bench.py``).
"""

import numpy as np

BACKEND = "python"


def _off_norm(a):
    d = np.diag(a)
    return float(np.sqrt(max(np.sum(a * a) - np.sum(d * d), 0.0)))


def jacobi_sweeps(a, v, off_threshold, skip_threshold, max_sweeps):
    """Cyclic Jacobi rotations on symmetric ``a`` (in place), accumulating ``v``.

    Returns ``(sweeps_used, final_off_diagonal_frobenius)``.
    """
    n = a.shape[0]
    off = _off_norm(a)
    sweeps = 0
    while off > off_threshold and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip_threshold:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[p, :] = new_p
                a[:, q] = new_q
                a[q, :] = new_q
                a[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                a[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                a[p, q] = 0.0
                a[q, p] = 0.0
                v_p = v[:, p].copy()
                v[:, p] = c * v_p - s * v[:, q]
                v[:, q] = s * v_p + c * v[:, q]
        sweeps += 1
        off = _off_norm(a)
    return sweeps, off


def chol_factor(a):
    """In-place lower Cholesky factor; upper triangle zeroed.

    Returns -1 on success, else the index of the first non-positive pivot.
    """
    n = a.shape[0]
    for j in range(n):
        d = a[j, j] - np.dot(a[j, :j], a[j, :j])
        if not d > 0.0:
            return j
        d = np.sqrt(d)
        a[j, j] = d
        if j + 1 < n:
            a[j + 1 :, j] = (a[j + 1 :, j] - a[j + 1 :, :j] @ a[j, :j]) / d
        a[j, j + 1 :] = 0.0
    return -1


def chol_solve_vec(lower, b):
    """Solve ``L L^T x = b`` in place, overwriting ``b`` with ``x``."""
    n = lower.shape[0]
    for i in range(n):
        b[i] = (b[i] - np.dot(lower[i, :i], b[:i])) / lower[i, i]
    for i in range(n - 1, -1, -1):
        b[i] = (b[i] - np.dot(lower[i + 1 :, i], b[i + 1 :])) / lower[i, i]


def lu_solve(a, b):
    """Solve the general square system ``a x = b``, overwriting ``b``.

    Returns 0 on success, 1 if the system is singular. ``a`` may be
    overwritten by the factorization.
    """
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return 1
    b[:] = x
    return 0


def thomas_solve(sub, diag, sup, b):
    """Tridiagonal solve without pivoting; overwrites all inputs, x in ``b``.

    ``sub[i] = A[i+1, i]`` and ``sup[i] = A[i, i+1]``. Returns 0 on success,
    1 on a zero pivot. Intended for the diagonally dominant systems produced
    by the implicit time steppers.
    """
    n = diag.shape[0]
    if diag[0] == 0.0:
        return 1
    for i in range(1, n):
        w = sub[i - 1] / diag[i - 1]
        diag[i] -= w * sup[i - 1]
        if diag[i] == 0.0:
            return 1
        b[i] -= w * b[i - 1]
    b[n - 1] /= diag[n - 1]
    for i in range(n - 2, -1, -1):
        b[i] = (b[i] - sup[i] * b[i + 1]) / diag[i]
    return 0


def _convection_diagonals(adv):
    # Element-exact quadrature of (a * u_x, v) for linear elements; the mesh
    # width cancels. Boundary rows are zeroed (Dirichlet).
    lo = adv[:-1]
    hi = adv[1:]
    w_lo = (2.0 * lo + hi) / 6.0  # element integral against the left hat
    w_hi = (lo + 2.0 * hi) / 6.0  # element integral against the right hat
    n = adv.shape[0]
    c_sub = -w_hi.copy()
    c_sup = w_lo.copy()
    c_diag = np.zeros(n)
    c_diag[1:] += w_hi
    c_diag[:-1] -= w_lo
    c_diag[0] = 0.0
    c_diag[n - 1] = 0.0
    c_sup[0] = 0.0
    c_sub[n - 2] = 0.0
    return c_sub, c_diag, c_sup


def burgers_step(m_off, m_diag, s_off, s_diag, adv, convection, u_n, u_nm1, first, dt, load, out):
    """One implicit step of the semi-discrete Burgers system.

    Assembles ``alpha*M + S + C(adv)`` on the tridiagonal stencil and solves
    by the Thomas recurrence; history weights follow the two-step scheme
    (single-step on the first step). Returns the tridiagonal solver status.
    """
    n = m_diag.shape[0]
    if first:
        alpha = 1.0 / dt
        rhs_u = u_n * alpha
    else:
        alpha = 1.5 / dt
        rhs_u = (2.0 * u_n - 0.5 * u_nm1) / dt
    a_sub = alpha * m_off + s_off
    a_sup = a_sub.copy()
    a_diag = alpha * m_diag + s_diag
    if convection:
        c_sub, c_diag, c_sup = _convection_diagonals(adv)
        a_sub = a_sub + c_sub
        a_diag = a_diag + c_diag
        a_sup = a_sup + c_sup
    b = np.empty(n)
    b[0] = m_diag[0] * rhs_u[0]
    b[n - 1] = m_diag[n - 1] * rhs_u[n - 1]
    b[1:-1] = m_off[:-1] * rhs_u[:-2] + m_diag[1:-1] * rhs_u[1:-1] + m_off[1:] * rhs_u[2:]
    b += load
    status = thomas_solve(a_sub, a_diag, a_sup, b)
    out[:] = b
    return status


def rom_evolve_step(m_r, s_y, conv_left, conv_right, b_tensor, rhs_const, a_n, a_nm1, first, dt, out):
    """One implicit step of the reduced system; solution written to ``out``.

    Convection is linearized about the extrapolated coefficients; the stored
    quadratic tensor carries the right-hand-side sign convention, hence the
    subtraction. Returns 0 on success, 1 if the reduced system is singular.
    """
    if first:
        atilde = a_n
        alpha = 1.0 / dt
        rhs = m_r @ (a_n / dt)
    else:
        atilde = 2.0 * a_n - a_nm1
        alpha = 1.5 / dt
        rhs = m_r @ ((2.0 * a_n - 0.5 * a_nm1) / dt)
    g = conv_left - np.einsum("k,ikj->ij", atilde, b_tensor)
    sys = alpha * m_r + s_y + g
    rhs = rhs + rhs_const - conv_right @ atilde
    status = lu_solve(sys, rhs)
    out[:] = rhs
    return status
