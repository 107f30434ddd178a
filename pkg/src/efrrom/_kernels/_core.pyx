# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: hot loops of the eigensolver, factorizations and
time steppers. Mirrors the signatures of ``_pure``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

BACKEND = "compiled"


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double off_threshold,
                  double skip_threshold, int max_sweeps):
    """Cyclic Jacobi rotations on symmetric ``a`` (in place), accumulating ``v``.

    Returns ``(sweeps_used, final_off_diagonal_frobenius)``.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweeps = 0
    cdef double off, apq, app, aqq, tau, t, c, s, akp, akq
    off = _off_norm(a)
    while off > off_threshold and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) <= skip_threshold:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[p, k] = a[k, p]
                    a[k, q] = s * akp + c * akq
                    a[q, k] = a[k, q]
                a[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                a[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
        sweeps += 1
        off = _off_norm(a)
    return sweeps, off


cdef double _off_norm(double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return sqrt(acc)


def chol_factor(double[:, ::1] a):
    """In-place lower Cholesky factor; upper triangle zeroed.

    Returns -1 on success, else the index of the first non-positive pivot.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double d
    for j in range(n):
        d = a[j, j]
        for k in range(j):
            d -= a[j, k] * a[j, k]
        if not d > 0.0:
            return j
        d = sqrt(d)
        a[j, j] = d
        for i in range(j + 1, n):
            a[i, j] = a[i, j]
            for k in range(j):
                a[i, j] = a[i, j] - a[i, k] * a[j, k]
            a[i, j] /= d
        for i in range(j + 1, n):
            a[j, i] = 0.0
    return -1


def chol_solve_vec(double[:, ::1] lower, double[::1] b):
    """Solve ``L L^T x = b`` in place, overwriting ``b`` with ``x``."""
    cdef Py_ssize_t n = lower.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= lower[i, k] * b[k]
        b[i] = acc / lower[i, i]
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for k in range(i + 1, n):
            acc -= lower[k, i] * b[k]
        b[i] = acc / lower[i, i]


def lu_solve(double[:, ::1] a, double[::1] b):
    """Solve the general square system ``a x = b``, overwriting ``b``.

    Partial-pivot LU; ``a`` is destroyed. Returns 0 on success, 1 if singular.
    """
    return _lu_solve(a, b)


cdef int _lu_solve(double[:, ::1] a, double[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k, piv
    cdef double big, tmp, w
    for k in range(n):
        piv = k
        big = fabs(a[k, k])
        for i in range(k + 1, n):
            if fabs(a[i, k]) > big:
                big = fabs(a[i, k])
                piv = i
        if big == 0.0:
            return 1
        if piv != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[piv, j]
                a[piv, j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, n):
            w = a[i, k] / a[k, k]
            a[i, k] = w
            for j in range(k + 1, n):
                a[i, j] -= w * a[k, j]
            b[i] -= w * b[k]
    for i in range(n - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, n):
            tmp -= a[i, j] * b[j]
        b[i] = tmp / a[i, i]
    return 0


def thomas_solve(double[::1] sub, double[::1] diag, double[::1] sup, double[::1] b):
    """Tridiagonal solve without pivoting; overwrites all inputs, x in ``b``."""
    return _thomas(sub, diag, sup, b)


cdef int _thomas(double[::1] sub, double[::1] diag, double[::1] sup, double[::1] b):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double w
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


def burgers_step(double[::1] m_off, double[::1] m_diag, double[::1] s_off,
                 double[::1] s_diag, double[::1] adv, bint convection,
                 double[::1] u_n, double[::1] u_nm1, bint first, double dt,
                 double[::1] load, double[::1] out):
    """One implicit step of the semi-discrete Burgers system.

    Assembles ``alpha*M + S + C(adv)`` on the tridiagonal stencil and solves
    by the Thomas recurrence; history weights follow the two-step scheme
    (single-step on the first step). Returns the tridiagonal solver status.
    """
    cdef Py_ssize_t n = m_diag.shape[0]
    cdef Py_ssize_t i
    cdef double alpha, w_lo, w_hi, r_prev, r_here, r_next
    a_sub_nd = np.empty(n - 1)
    a_diag_nd = np.empty(n)
    a_sup_nd = np.empty(n - 1)
    rhs_nd = np.empty(n)
    cdef double[::1] a_sub = a_sub_nd
    cdef double[::1] a_diag = a_diag_nd
    cdef double[::1] a_sup = a_sup_nd
    cdef double[::1] rhs = rhs_nd
    if first:
        alpha = 1.0 / dt
    else:
        alpha = 1.5 / dt
    for i in range(n - 1):
        a_sub[i] = alpha * m_off[i] + s_off[i]
        a_sup[i] = a_sub[i]
    for i in range(n):
        a_diag[i] = alpha * m_diag[i] + s_diag[i]
    if convection:
        for i in range(1, n - 1):
            w_hi = (adv[i - 1] + 2.0 * adv[i]) / 6.0
            w_lo = (2.0 * adv[i] + adv[i + 1]) / 6.0
            a_sub[i - 1] -= w_hi
            a_diag[i] += w_hi - w_lo
            a_sup[i] += w_lo
    # mass-weighted history term; boundary rows of M are identity
    for i in range(n):
        if first:
            rhs[i] = u_n[i] / dt
        else:
            rhs[i] = (2.0 * u_n[i] - 0.5 * u_nm1[i]) / dt
    r_here = rhs[0]
    out[0] = m_diag[0] * r_here
    for i in range(1, n - 1):
        out[i] = m_off[i - 1] * rhs[i - 1] + m_diag[i] * rhs[i] + m_off[i] * rhs[i + 1]
    out[n - 1] = m_diag[n - 1] * rhs[n - 1]
    for i in range(n):
        out[i] += load[i]
    return _thomas(a_sub, a_diag, a_sup, out)


def rom_evolve_step(double[:, ::1] m_r, double[:, ::1] s_y, double[:, ::1] conv_left,
                    double[:, ::1] conv_right, double[:, :, ::1] b_tensor,
                    double[::1] rhs_const, double[::1] a_n, double[::1] a_nm1,
                    bint first, double dt, double[::1] out):
    """One implicit step of the reduced system; solution written to ``out``.

    Returns 0 on success, 1 if the reduced system is singular.
    """
    cdef Py_ssize_t r = m_r.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double alpha, acc, g
    atilde_nd = np.empty(r)
    sys_nd = np.empty((r, r))
    cdef double[::1] atilde = atilde_nd
    cdef double[:, ::1] sys = sys_nd
    if first:
        alpha = 1.0 / dt
        for i in range(r):
            atilde[i] = a_n[i]
    else:
        alpha = 1.5 / dt
        for i in range(r):
            atilde[i] = 2.0 * a_n[i] - a_nm1[i]
    for i in range(r):
        for j in range(r):
            g = conv_left[i, j]
            for k in range(r):
                g -= atilde[k] * b_tensor[i, k, j]
            sys[i, j] = alpha * m_r[i, j] + s_y[i, j] + g
    for i in range(r):
        acc = rhs_const[i]
        for k in range(r):
            if first:
                acc += m_r[i, k] * a_n[k] / dt
            else:
                acc += m_r[i, k] * (2.0 * a_n[k] - 0.5 * a_nm1[k]) / dt
            acc -= conv_right[i, k] * atilde[k]
        out[i] = acc
    return _lu_solve(sys, out)
