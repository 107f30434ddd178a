"""Self-contained dense linear algebra used by every other module.

Matrices and vectors are plain float64 numpy arrays. The symmetric
eigensolver is cyclic Jacobi (off-diagonal Frobenius threshold
``1e-14 * ||A||_F``, at most 100 sweeps), chosen because every matrix here is
small (at most the snapshot count) and Jacobi gives orthogonal vectors by
construction. SPD systems are solved by unpivoted Cholesky; the nonsymmetric
implicit-step systems go through :func:`solve` (partial-pivot LU).
"""

from typing import NamedTuple

import numpy as np

from efrrom import _kernels
from efrrom.errors import (
    ConvergenceError,
    DimensionError,
    InvalidOrderError,
    NotSPDError,
    SolverError,
    SymmetryError,
)

JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_FACTOR = 1e-14
SYMMETRY_RTOL = 1e-12


class EigenDecomposition(NamedTuple):
    """Eigenvalues in nonincreasing order with matching column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


def _as_matrix(a, name="matrix"):
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got ndim={a.ndim}")
    return a

def _as_square(a, name="matrix"):
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def _as_vector(b, name="vector"):
    b = np.ascontiguousarray(b, dtype=float)
    if b.ndim != 1:
        raise DimensionError(f"{name} must be 1-dimensional, got ndim={b.ndim}")
    return b


def sym_eig(a):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in nonincreasing order; ties keep the order in
    which the converged diagonal produced them (stable sort), so repeated
    calls are reproducible.
    """
    a = _as_square(a)
    n = a.shape[0]
    fro = float(np.linalg.norm(a))
    if float(np.linalg.norm(a - a.T)) > SYMMETRY_RTOL * max(fro, 1e-300):
        raise SymmetryError("matrix is not symmetric to relative tolerance 1e-12")
    work = 0.5 * (a + a.T)
    vectors = np.eye(n)
    threshold = JACOBI_OFF_FACTOR * fro
    if fro > 0.0:
        skip = threshold / max(n, 1)
        sweeps, off = _kernels.jacobi_sweeps(work, vectors, threshold, skip, JACOBI_MAX_SWEEPS)
        if off > threshold:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps "
                f"(off-diagonal norm {off:.3e}, threshold {threshold:.3e})"
            )
    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], np.ascontiguousarray(vectors[:, order]))


def cholesky(a):
    """Lower Cholesky factor of an SPD matrix (no pivoting)."""
    a = _as_square(a)
    work = a.copy()
    bad = _kernels.chol_factor(work)
    if bad >= 0:
        raise NotSPDError(f"non-positive pivot at index {bad}; matrix is not SPD")
    return work


def solve_spd(a, b):
    """Solve ``a x = b`` for SPD ``a`` via Cholesky. ``b`` may be a matrix."""
    lower = cholesky(a)
    return solve_cholesky(lower, b)


def solve_cholesky(lower, b):
    """Solve with a precomputed lower Cholesky factor."""
    b = np.asarray(b, dtype=float)
    n = lower.shape[0]
    if b.shape[0] != n:
        raise DimensionError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    if b.ndim == 1:
        x = np.ascontiguousarray(b, dtype=float).copy()
        _kernels.chol_solve_vec(lower, x)
        return x
    if b.ndim != 2:
        raise DimensionError("right-hand side must be a vector or a matrix")
    out = np.empty_like(b)
    for j in range(b.shape[1]):
        col = np.ascontiguousarray(b[:, j])
        _kernels.chol_solve_vec(lower, col)
        out[:, j] = col
    return out


def solve(a, b):
    """Solve a general square system by partial-pivot LU."""
    a = _as_square(a)
    b = _as_vector(b, "right-hand side")
    if b.shape[0] != a.shape[0]:
        raise DimensionError(
            f"right-hand side has length {b.shape[0]}, expected {a.shape[0]}"
        )
    work = a.copy()
    x = b.copy()
    if _kernels.lu_solve(work, x) != 0:
        raise SolverError("singular linear system")
    return x


def mat_power(a, m):
    """``a`` multiplied into itself ``m - 1`` times; ``m = 1`` returns a copy.

    ``m = 0`` is rejected: the differential filters are defined for order
    >= 1 only, so the identity is deliberately excluded.
    """
    a = _as_square(a)
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
        raise InvalidOrderError(f"order must be a positive integer, got {m!r}")
    if m < 1:
        raise InvalidOrderError(f"order must be >= 1, got {m}")
    out = a.copy()
    for _ in range(m - 1):
        out = out @ a
    return out


def weighted_inner(u, v, m):
    """Weighted inner product ``u^T m v``."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    m = _as_matrix(m, "weight matrix")
    if m.shape != (u.shape[0], v.shape[0]):
        raise DimensionError(
            f"weight matrix shape {m.shape} incompatible with vectors "
            f"({u.shape[0]}, {v.shape[0]})"
        )
    return float(u @ (m @ v))
