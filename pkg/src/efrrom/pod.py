"""Basis extraction from snapshot sets by the method of snapshots.

The small ``N x N`` Gram matrix of mass-weighted snapshot fluctuations is
eigendecomposed instead of the large spatial correlation operator; the two
problems share their nonzero spectrum. The snapshot average acts as a fixed
lifting (coefficient one) and only fluctuations are spanned by the modes.
Modes are re-orthonormalized against the mass matrix after scaling, so the
reduced mass matrix is the identity to rounding even near the rank cutoff.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from efrrom import linalg, matio
from efrrom.errors import DimensionError, RangeError, RankError, ValidationError

RANK_TOLERANCE = 1e-12


@dataclass
class SnapshotSet:
    """Solution columns with their mass matrix and per-column metadata."""

    data: np.ndarray          # (n_dof, n_snapshots)
    mass: np.ndarray          # (n_dof, n_dof)
    times: np.ndarray         # (n_snapshots,)
    params: np.ndarray        # (n_snapshots, dim) parameter vector per column

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.params = np.atleast_2d(np.asarray(self.params, dtype=float))
        n, cols = self.data.shape
        if cols < 1:
            raise ValidationError("snapshot set is empty")
        if self.mass.shape != (n, n):
            raise DimensionError(
                f"mass matrix shape {self.mass.shape} does not match snapshot length {n}"
            )
        if self.times.shape[0] != cols or self.params.shape[0] != cols:
            raise DimensionError("per-column metadata does not match the column count")

    @property
    def n_snapshots(self):
        return self.data.shape[1]


def concat_snapshot_sets(sets):
    """Concatenate snapshot blocks from several parameter runs (shared mass)."""
    sets = list(sets)
    if not sets:
        raise ValidationError("no snapshot sets to concatenate")
    mass = sets[0].mass
    for s in sets[1:]:
        if s.mass.shape != mass.shape:
            raise DimensionError("snapshot sets live on different grids")
    return SnapshotSet(
        data=np.hstack([s.data for s in sets]),
        mass=mass,
        times=np.concatenate([s.times for s in sets]),
        params=np.vstack([s.params for s in sets]),
    )


@dataclass
class PODBasis:
    """Mean field plus ``r`` mass-orthonormal modes and the full spectrum."""

    mean: np.ndarray          # (n_dof,)
    modes: np.ndarray         # (n_dof, r)
    eigenvalues: np.ndarray   # full computed spectrum, nonincreasing, >= 0
    r: int


def center_snapshots(snaps):
    """Columnwise mean and the fluctuation matrix ``data - mean``."""
    if snaps.data.shape[1] < 1:
        raise ValidationError("snapshot set is empty")
    mean = snaps.data.mean(axis=1)
    fluctuations = snaps.data - mean[:, None]
    return mean, fluctuations


def numerical_rank(eigenvalues):
    """Count of eigenvalues above ``1e-12`` times the largest one."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size == 0 or eigenvalues[0] <= 0.0:
        return 0
    return int(np.sum(eigenvalues >= RANK_TOLERANCE * eigenvalues[0]))


def build_pod(snaps, r):
    """POD basis of ``r`` modes from the snapshot Gram eigenproblem."""
    if r < 1:
        raise RangeError(f"r must be >= 1, got {r}")
    mean, fluct = center_snapshots(snaps)
    weighted = snaps.mass @ fluct
    gram = fluct.T @ weighted
    gram = 0.5 * (gram + gram.T)
    eig = linalg.sym_eig(gram)
    values = np.where(eig.values < 0.0, 0.0, eig.values)
    rank = numerical_rank(values)
    if r > rank:
        raise RankError(r, rank)
    modes = fluct @ (eig.vectors[:, :r] / np.sqrt(values[:r]))
    modes = _mass_orthonormalize(modes, snaps.mass)
    for j in range(r):
        lead = np.argmax(np.abs(modes[:, j]))
        if modes[lead, j] < 0.0:
            modes[:, j] = -modes[:, j]
    return PODBasis(mean=mean, modes=modes, eigenvalues=values, r=int(r))


def _mass_orthonormalize(modes, mass):
    # One Cholesky pass of the small Gram factor; spans are preserved and the
    # leading mode only rescales.
    gram = modes.T @ (mass @ modes)
    gram = 0.5 * (gram + gram.T)
    lower = linalg.cholesky(gram)
    return _tri_lower_solve_rows(lower, modes.T).T


def _tri_lower_solve_rows(lower, b):
    """Solve ``lower @ x = b`` for row-blocked ``b`` by forward substitution."""
    x = np.array(b, dtype=float, copy=True)
    for i in range(lower.shape[0]):
        if i:
            x[i] -= lower[i, :i] @ x[:i]
        x[i] /= lower[i, i]
    return x


def project(basis, u, mass):
    """Reduced coefficients of ``u``: mass-weighted moments of ``u - mean``."""
    u = np.asarray(u, dtype=float)
    if u.shape != basis.mean.shape:
        raise DimensionError(f"state shape {u.shape} does not match mean {basis.mean.shape}")
    if mass.shape[0] != u.shape[0]:
        raise DimensionError("mass matrix does not match the state length")
    return basis.modes.T @ (mass @ (u - basis.mean))


def reconstruct(basis, a):
    """Lifted field ``mean + modes @ a``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (basis.r,):
        raise DimensionError(f"coefficient vector shape {a.shape}, expected ({basis.r},)")
    return basis.mean + basis.modes @ a


def save_basis(directory, basis, metadata=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    matio.write_vector(directory / "pod_mean.txt", basis.mean)
    matio.write_matrix(directory / "pod_modes.txt", basis.modes)
    matio.write_vector(directory / "pod_eigenvalues.txt", basis.eigenvalues)
    header = {"r": basis.r, "n_dof": basis.mean.shape[0]}
    header.update(metadata or {})
    matio.write_keyvalues(directory / "pod_header.txt", header)


def load_basis(directory):
    directory = Path(directory)
    header = matio.read_keyvalues(directory / "pod_header.txt")
    basis = PODBasis(
        mean=matio.read_vector(directory / "pod_mean.txt"),
        modes=matio.read_matrix(directory / "pod_modes.txt"),
        eigenvalues=matio.read_vector(directory / "pod_eigenvalues.txt"),
        r=int(header["r"]),
    )
    if basis.modes.shape[1] != basis.r:
        raise ValidationError("stored mode count disagrees with the header")
    return basis
