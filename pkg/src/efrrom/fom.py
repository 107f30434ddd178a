"""Desk-scale full-order model: 1D viscous Burgers with variable viscosity.

Linear finite elements on the unit interval with homogeneous Dirichlet ends,
stepped by the linearized two-step backward-difference scheme: convection is
advected implicitly by the extrapolated field ``2 u^n - u^{n-1}`` while the
advected factor stays implicit; the very first step falls back to backward
Euler. The steep initial condition (unit step on ``(0, 0.5]``, mass-projected
onto the FE space) makes the flow convection-dominated at small viscosity.

Variable viscosity enters through per-component stiffness matrices (midpoint
quadrature per element, exact for elementwise-constant coefficients);
convection uses exact element quadrature. Boundary rows/columns are
eliminated: mass rows become identity, stiffness and convection rows vanish,
so states carry exact zeros at both ends.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from efrrom import _kernels, matio
from efrrom.errors import DimensionError, GridError, RangeError, SolverError
from efrrom.pod import SnapshotSet


@dataclass(frozen=True)
class FomGrid:
    """Uniform node set on [0, 1]."""

    n_nodes: int

    def __post_init__(self):
        if self.n_nodes < 3:
            raise GridError(f"need at least 3 nodes, got {self.n_nodes}")

    @property
    def h(self):
        return 1.0 / (self.n_nodes - 1)

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.n_nodes)


@dataclass
class FomMatrices:
    """Constrained mass plus one stiffness matrix per affine viscosity
    component, and the unit-viscosity stiffness used by the spatial filters."""

    grid: FomGrid
    mass: np.ndarray
    stiffness_components: list
    stiffness_unit: np.ndarray

    @property
    def n_components(self):
        return len(self.stiffness_components)


@dataclass
class FomState:
    """Nodal velocity values at one time instant."""

    u: np.ndarray
    t: float


def _dense_from_tridiagonal(n, off, diag):
    out = np.zeros((n, n))
    idx = np.arange(n)
    out[idx, idx] = diag
    out[idx[:-1], idx[:-1] + 1] = off
    out[idx[:-1] + 1, idx[:-1]] = off
    return out


def _tridiagonal_of(a):
    return np.diag(a, k=-1).copy(), np.diag(a).copy(), np.diag(a, k=1).copy()


def assemble_fom(grid, viscosity_components):
    """Mass and per-component stiffness matrices with Dirichlet elimination."""
    n = grid.n_nodes
    h = grid.h
    mass_off = np.full(n - 1, h / 6.0)
    mass_diag = np.full(n, 2.0 * h / 3.0)
    mass_diag[0] = mass_diag[-1] = 1.0
    mass_off[0] = mass_off[-1] = 0.0
    mass = _dense_from_tridiagonal(n, mass_off, mass_diag)

    midpoints = (grid.nodes[:-1] + grid.nodes[1:]) / 2.0

    def weighted_stiffness(coefficient):
        nu = np.asarray(coefficient(midpoints), dtype=float) * np.ones(n - 1)
        off = -nu / h
        diag = np.zeros(n)
        diag[:-1] += nu / h
        diag[1:] += nu / h
        diag[0] = diag[-1] = 0.0
        off[0] = off[-1] = 0.0
        return _dense_from_tridiagonal(n, off, diag)

    components = [weighted_stiffness(c) for c in viscosity_components]
    unit = weighted_stiffness(lambda x: np.ones_like(x))
    return FomMatrices(grid=grid, mass=mass, stiffness_components=components, stiffness_unit=unit)


def convection_matrix(grid, advecting):
    """Linearized convection operator ``(a u_x, v)`` for nodal field ``a``.

    Element-exact quadrature; Dirichlet rows and columns are zeroed.
    """
    advecting = np.asarray(advecting, dtype=float)
    n = grid.n_nodes
    if advecting.shape != (n,):
        raise DimensionError(f"advecting field shape {advecting.shape}, expected ({n},)")
    lo = advecting[:-1]
    hi = advecting[1:]
    w_lo = (2.0 * lo + hi) / 6.0
    w_hi = (lo + 2.0 * hi) / 6.0
    out = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    out[idx, idx - 1] = -w_hi[:-1]
    out[idx, idx] = w_hi[:-1] - w_lo[1:]
    out[idx, idx + 1] = w_lo[1:]
    out[:, 0] = 0.0
    out[:, n - 1] = 0.0
    return out


def load_vector(grid, forcing):
    """Consistent FE load of a spatial function, Simpson per element."""
    if forcing is None:
        return np.zeros(grid.n_nodes)
    nodes = grid.nodes
    mids = (nodes[:-1] + nodes[1:]) / 2.0
    f_nodes = np.asarray(forcing(nodes), dtype=float) * np.ones_like(nodes)
    f_mids = np.asarray(forcing(mids), dtype=float) * np.ones_like(mids)
    h = grid.h
    out = np.zeros(grid.n_nodes)
    out[:-1] += h / 6.0 * (f_nodes[:-1] + 2.0 * f_mids)
    out[1:] += h / 6.0 * (2.0 * f_mids + f_nodes[1:])
    out[0] = out[-1] = 0.0
    return out


def initial_step_state(matrices):
    """Mass projection of the unit step on ``(0, 0.5]`` onto the FE space."""
    from efrrom import linalg

    grid = matrices.grid
    nodes = grid.nodes
    h = grid.h
    b = np.zeros(grid.n_nodes)
    for k in range(grid.n_nodes - 1):
        left, right = nodes[k], nodes[k + 1]
        a = max(left, 0.0)
        c = min(right, 0.5)
        if c <= a:
            continue
        b[k] += ((right - a) ** 2 - (right - c) ** 2) / (2.0 * h)
        b[k + 1] += ((c - left) ** 2 - (a - left) ** 2) / (2.0 * h)
    b[0] = b[-1] = 0.0
    return FomState(u=linalg.solve_spd(matrices.mass, b), t=0.0)


def _combined_stiffness_diagonals(matrices, y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape[0] != matrices.n_components - 1:
        raise DimensionError(
            f"parameter vector has {y.shape[0]} entries, expected {matrices.n_components - 1}"
        )
    weights = np.concatenate(([1.0], y))
    off = np.zeros(matrices.grid.n_nodes - 1)
    diag = np.zeros(matrices.grid.n_nodes)
    for w, comp in zip(weights, matrices.stiffness_components):
        sub, d, _ = _tridiagonal_of(comp)
        off += w * sub
        diag += w * d
    return off, diag


def fom_step(state_n, state_nm1, matrices, y, dt, forcing=None, convection=True):
    """Advance one time step; ``state_nm1=None`` selects the single-step start.

    ``forcing`` is a spatial callable evaluated at the target time by the
    caller.
    """
    if dt <= 0.0:
        raise RangeError(f"dt must be positive, got {dt}")
    n = matrices.grid.n_nodes
    if state_n.u.shape != (n,) or (state_nm1 is not None and state_nm1.u.shape != (n,)):
        raise DimensionError("state does not live on the model grid")
    m_off, m_diag, _ = _tridiagonal_of(matrices.mass)
    s_off, s_diag = _combined_stiffness_diagonals(matrices, y)
    first = state_nm1 is None
    u_nm1 = state_n.u if first else state_nm1.u
    adv = state_n.u if first else 2.0 * state_n.u - state_nm1.u
    load = load_vector(matrices.grid, forcing)
    out = np.empty(n)
    status = _kernels.burgers_step(
        m_off, m_diag, s_off, s_diag, np.ascontiguousarray(adv), bool(convection),
        np.ascontiguousarray(state_n.u), np.ascontiguousarray(u_nm1),
        first, float(dt), load, out,
    )
    if status != 0:
        raise SolverError(f"singular full-order system at t={state_n.t + dt}")
    out[0] = out[-1] = 0.0
    return FomState(u=out, t=state_n.t + dt)


def run_trajectory(initial, matrices, y, dt, n_steps, stride=1, forcing=None,
                   convection=True, record_energy=False, capture_steps=()):
    """Time loop shared by :func:`fom_run` and the pipeline.

    Returns ``(snapshots, snapshot_times, final_state, energies, captured)``:
    ``energies`` holds one value per step (including the initial state) when
    requested, else ``None``; ``captured`` maps each step index listed in
    ``capture_steps`` to a copy of the state reached there.
    """
    if dt <= 0.0:
        raise RangeError(f"dt must be positive, got {dt}")
    if stride < 1:
        raise RangeError(f"snapshot stride must be >= 1, got {stride}")
    n = matrices.grid.n_nodes
    m_off, m_diag, _ = _tridiagonal_of(matrices.mass)
    s_off, s_diag = _combined_stiffness_diagonals(matrices, y)
    zero_load = np.zeros(n)

    u_n = np.ascontiguousarray(initial.u, dtype=float)
    u_nm1 = u_n
    taken = [u_n.copy()]
    times = [initial.t]
    energies = [0.5 * float(u_n @ (matrices.mass @ u_n))] if record_energy else None
    captured = {}
    if 0 in capture_steps:
        captured[0] = u_n.copy()
    for step in range(1, n_steps + 1):
        t_next = initial.t + step * dt
        if forcing is None:
            load = zero_load
        else:
            load = load_vector(matrices.grid, lambda x: forcing(x, t_next))
        out = np.empty(n)
        adv = u_n if step == 1 else 2.0 * u_n - u_nm1
        status = _kernels.burgers_step(
            m_off, m_diag, s_off, s_diag, np.ascontiguousarray(adv), bool(convection),
            u_n, u_nm1, step == 1, float(dt), load, out,
        )
        if status != 0:
            raise SolverError(f"singular full-order system at step {step} (t={t_next})")
        out[0] = out[-1] = 0.0
        u_nm1, u_n = u_n, out
        if record_energy:
            energies.append(0.5 * float(u_n @ (matrices.mass @ u_n)))
        if step in capture_steps:
            captured[step] = u_n.copy()
        if step % stride == 0:
            taken.append(u_n.copy())
            times.append(t_next)
    final = FomState(u=u_n.copy(), t=initial.t + n_steps * dt)
    snapshots = np.column_stack(taken)
    if record_energy:
        energies = np.asarray(energies)
    return snapshots, np.asarray(times), final, energies, captured


def fom_run(initial, matrices, y, dt, t_final, snapshot_stride, forcing=None, convection=True):
    """Run to ``t_final`` and collect every stride-th state (initial included)."""
    if t_final <= initial.t:
        raise RangeError(f"t_final={t_final} must exceed the initial time {initial.t}")
    n_steps = int(round((t_final - initial.t) / dt))
    if n_steps < 1:
        raise RangeError("t_final is less than one time step away")
    snapshots, times, _, _, _ = run_trajectory(
        initial, matrices, y, dt, n_steps, stride=snapshot_stride,
        forcing=forcing, convection=convection,
    )
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    params = np.tile(y_arr, (snapshots.shape[1], 1))
    return SnapshotSet(data=snapshots, mass=matrices.mass, times=times, params=params)


def energy_qoi(state, mass):
    """Kinetic energy ``u^T M u / 2`` of a state (or bare nodal vector)."""
    u = np.asarray(getattr(state, "u", state), dtype=float)
    if mass.shape[0] != u.shape[0]:
        raise DimensionError(
            f"state length {u.shape[0]} does not match mass dimension {mass.shape[0]}"
        )
    return 0.5 * float(u @ (mass @ u))


def save_snapshot_set(directory, snaps, dt, stride, prefix="snapshots", write_mass=True):
    """Write the snapshot matrix, mass matrix and key=value metadata.

    This trio is also the ingestion format for snapshots produced by an
    external solver. ``write_mass=False`` skips the (shared) mass matrix so
    multi-parameter collections do not duplicate it per block.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    matio.write_matrix(directory / f"{prefix}_data.txt", snaps.data)
    if write_mass:
        matio.write_matrix(directory / f"{prefix}_mass.txt", snaps.mass)
    meta = {
        "dt": float(dt),
        "stride": int(stride),
        "t0": float(snaps.times[0]),
        "y": snaps.params[0],
        "n_nodes": snaps.data.shape[0],
    }
    matio.write_keyvalues(directory / f"{prefix}_meta.txt", meta)


def load_snapshot_set(directory, prefix="snapshots", mass_path=None):
    directory = Path(directory)
    data = matio.read_matrix(directory / f"{prefix}_data.txt")
    mass = matio.read_matrix(mass_path or directory / f"{prefix}_mass.txt")
    meta = matio.read_keyvalues(directory / f"{prefix}_meta.txt")
    dt = float(meta["dt"])
    stride = int(meta["stride"])
    t0 = float(meta["t0"])
    y = np.array([float(v) for v in meta["y"].split(",")])
    times = t0 + dt * stride * np.arange(data.shape[1])
    params = np.tile(y, (data.shape[1], 1))
    return SnapshotSet(data=data, mass=mass, times=times, params=params)
