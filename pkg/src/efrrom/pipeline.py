"""End-to-end orchestration: offline training, online collocation sweeps,
filter analysis and the self-check suite.

Offline runs the full-order model at every training node, concatenates the
windowed snapshots across parameters, builds the basis and the reduced
operators, and writes everything to ``<out>/offline``. Online runs the
full-order model to the reduced start time at every collocation node (and,
when enabled, over the whole reporting horizon as the benchmark), projects
the start state, runs every configured filter setting, and assembles the
quadrature expectation of the energy per time step. All reductions walk the
nodes in index order so repeated runs are byte-identical.
"""

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from efrrom import fom, matio, pod, rom, uq
from efrrom.config import dump_config
from efrrom.errors import ArtifactError, EfrRomError
from efrrom.rom import EFRConfig, FilterSpec


@dataclass
class OfflineArtifacts:
    basis: pod.PODBasis
    operators: rom.ROMOperators


def _assemble(cfg):
    model = cfg.model()
    grid = fom.FomGrid(cfg.fom_n_nodes)
    matrices = fom.assemble_fom(grid, uq.affine_components(model))
    return model, grid, matrices


def _offline_node(cfg, y):
    _, _, matrices = _assemble(cfg)
    initial = fom.initial_step_state(matrices)
    n_steps = int(round(cfg.fom_t_final / cfg.fom_dt))
    snapshots, times, _, _, _ = fom.run_trajectory(
        initial, matrices, y, cfg.fom_dt, n_steps, stride=cfg.fom_snapshot_stride
    )
    keep = times >= cfg.fom_snapshot_start - 1e-9 * cfg.fom_dt
    return snapshots[:, keep], times[keep]


def _offline_node_task(args):
    cfg, index, y = args
    data, times = _offline_node(cfg, y)
    return index, data, times


def offline(cfg, workers=1):
    """Train the basis and reduced operators; persist them under out.dir."""
    model, grid, matrices = _assemble(cfg)
    train_grid = cfg.training_grid()
    ys = model.map_points(train_grid.points)

    tasks = [(cfg, k, ys[:, k].copy()) for k in range(train_grid.n_points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_offline_node_task, tasks))
    else:
        results = [_offline_node_task(t) for t in tasks]
    results.sort(key=lambda item: item[0])

    blocks = []
    for index, data, times in results:
        params = np.tile(ys[:, index], (data.shape[1], 1))
        blocks.append(pod.SnapshotSet(data=data, mass=matrices.mass, times=times, params=params))
    snaps = pod.concat_snapshot_sets(blocks)

    if cfg.pod_r == "full":
        probe = pod.build_pod(snaps, 1)
        r = pod.numerical_rank(probe.eigenvalues)
    else:
        r = int(cfg.pod_r)
    basis = pod.build_pod(snaps, r)
    ops = rom.build_rom_operators(
        basis, matrices, functools.partial(fom.convection_matrix, grid)
    )

    out = Path(cfg.out_dir) / "offline"
    out.mkdir(parents=True, exist_ok=True)
    pod.save_basis(out, basis, {"n_snapshots": snaps.n_snapshots})
    rom.save_operators(out, ops)
    matio.write_matrix(out / "fom_mass.txt", matrices.mass)
    uq.export_grid_csv(out / "training_grid.csv", ys, train_grid.weights)
    (out / "config.txt").write_text(dump_config(cfg))
    snap_dir = out / "snapshots"
    for index, data, times in results:
        block = pod.SnapshotSet(
            data=data, mass=matrices.mass, times=times,
            params=np.tile(ys[:, index], (data.shape[1], 1)),
        )
        fom.save_snapshot_set(
            snap_dir, block, cfg.fom_dt, cfg.fom_snapshot_stride,
            prefix=f"node_{index:04d}", write_mass=False,
        )
    return OfflineArtifacts(basis=basis, operators=ops)


def load_artifacts(cfg):
    out = Path(cfg.out_dir) / "offline"
    if not (out / "pod_header.txt").exists() or not (out / "ops_header.txt").exists():
        raise ArtifactError(f"offline artifacts not found under {out}; run 'offline' first")
    return OfflineArtifacts(basis=pod.load_basis(out), operators=rom.load_operators(out))


def _online_node_safe(args):
    try:
        return _online_node_task(args)
    except EfrRomError as exc:
        return args[1], str(exc), None


def _online_node_task(args):
    cfg, index, y, basis, ops, specs = args
    _, _, matrices = _assemble(cfg)
    initial = fom.initial_step_state(matrices)
    dt = cfg.fom_dt
    k0 = int(round(cfg.rom_start_time() / dt))
    total_steps = cfg.rom_total_steps()
    t_start = cfg.rom_start_time()
    t_end = t_start + total_steps * dt

    if cfg.rom_fom_benchmark:
        _, _, _, energies, captured = fom.run_trajectory(
            initial, matrices, y, dt, k0 + total_steps,
            stride=max(k0 + total_steps, 1), record_energy=True, capture_steps=(k0,),
        )
        fom_energy = energies[k0:]
    else:
        _, _, final, _, _ = fom.run_trajectory(
            initial, matrices, y, dt, k0, stride=max(k0, 1)
        )
        captured = {k0: final.u}
        fom_energy = None
    a0 = pod.project(basis, captured[k0], matrices.mass)

    rom_qoi = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for spec in specs:
            cfg_run = EFRConfig(dt=dt, t_final=t_end, filter=spec, chi=cfg.rom_chi)
            traj = rom.efr_run(a0, ops, y, cfg_run, t0=t_start)
            rom_qoi[spec.tag()] = (traj.times, traj.coefficients, traj.qoi)
    return index, fom_energy, rom_qoi


def _relative_series_error(values, reference):
    with np.errstate(over="ignore", invalid="ignore"):
        num = float(np.sum(np.abs(np.asarray(values) - np.asarray(reference))))
        den = float(np.sum(np.abs(np.asarray(reference))))
    err = num / den if den > 0 else math.inf
    return err if math.isfinite(err) else math.inf


@dataclass
class ExpectationSeries:
    """Quadrature expectation of the energy per time step."""

    times: np.ndarray
    values: np.ndarray


def online(cfg, workers=1, permissive=False):
    """Run all filter settings over the collocation grid; write CSV outputs.

    Returns a summary dict with per-setting expectation series and, when the
    benchmark is enabled, time-averaged relative expected-energy errors over
    the snapshot window and over the full reporting horizon.
    """
    artifacts = load_artifacts(cfg)
    model = cfg.model()
    grid = cfg.online_grid()
    ys = model.map_points(grid.points)
    specs = cfg.filter_specs()
    dt = cfg.fom_dt
    t_start = cfg.rom_start_time()
    total_steps = cfg.rom_total_steps()
    window_steps = cfg.rom_window_steps()
    times = t_start + dt * np.arange(total_steps + 1)

    out = Path(cfg.out_dir) / "online"
    out.mkdir(parents=True, exist_ok=True)
    uq.export_grid_csv(out / "grid.csv", ys, grid.weights)

    tasks = [
        (cfg, k, ys[:, k].copy(), artifacts.basis, artifacts.operators, specs)
        for k in range(grid.n_points)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_online_node_safe, tasks))
    else:
        results = [_online_node_safe(t) for t in tasks]
    results.sort(key=lambda item: item[0])

    failed = [(index, message) for index, message, qoi in results if qoi is None]
    if failed and not permissive:
        index, message = failed[0]
        raise EfrRomError(f"online node {index} failed: {message}")
    ok = [(index, fe, qoi) for index, fe, qoi in results if qoi is not None]
    if not ok:
        raise EfrRomError("every online node failed")

    # per-node CSV files
    for index, fom_energy, rom_qoi in ok:
        if fom_energy is not None:
            fdir = out / "fom"
            fdir.mkdir(exist_ok=True)
            matio.write_csv(
                fdir / f"point_{index:04d}.csv", ["t", "energy"],
                ((times[i], fom_energy[i]) for i in range(times.shape[0])),
            )
        for spec in specs:
            tag = spec.tag()
            sdir = out / tag
            sdir.mkdir(exist_ok=True)
            t, coeffs, qoi = rom_qoi[tag]
            rom.write_trajectory_csv(
                sdir / f"point_{index:04d}.csv",
                rom.ROMTrajectory(times=t, coefficients=coeffs, qoi=qoi),
            )

    # expectation assembly in fixed node order; failed nodes (permissive
    # mode) drop out with renormalized weights
    weights = grid.weights
    active = [index for index, _, _ in ok]
    weight_sum = math.fsum(weights[i] for i in active)
    expectations = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for spec in specs:
            tag = spec.tag()
            acc = np.zeros(total_steps + 1)
            for index, _, rom_qoi in ok:
                acc = acc + (weights[index] / weight_sum) * rom_qoi[tag][2]
            expectations[tag] = ExpectationSeries(times=times, values=acc)
            matio.write_csv(
                out / tag / "expectation.csv", ["t", "expected_energy"],
                ((times[i], acc[i]) for i in range(times.shape[0])),
            )

    summary = {
        "times": times,
        "expectations": expectations,
        "failed_nodes": [index for index, _ in failed],
        "window_steps": window_steps,
    }
    if cfg.rom_fom_benchmark:
        acc = np.zeros(total_steps + 1)
        for index, fom_energy, _ in ok:
            acc = acc + (weights[index] / weight_sum) * fom_energy
        fom_expectation = ExpectationSeries(times=times, values=acc)
        matio.write_csv(
            out / "fom" / "expectation.csv", ["t", "expected_energy"],
            ((times[i], acc[i]) for i in range(times.shape[0])),
        )
        errors = {}
        w = window_steps + 1
        for spec in specs:
            tag = spec.tag()
            values = expectations[tag].values
            errors[tag] = (
                _relative_series_error(values[:w], acc[:w]),
                _relative_series_error(values, acc),
            )
        rows = []
        for spec in specs:
            tag = spec.tag()
            rows.append(
                [tag, spec.kind, spec.delta, float(spec.m), errors[tag][0], errors[tag][1]]
            )
        matio.write_csv(
            out / "errors.csv",
            ["tag", "kind", "delta", "m", "err_window", "err_horizon"],
            rows,
        )
        summary["fom_expectation"] = fom_expectation
        summary["errors"] = errors
    return summary


def analyze_filter(cfg):
    """Transfer factors of every configured filter on the reduced spectrum."""
    artifacts = load_artifacts(cfg)
    ops = artifacts.operators
    mu = rom.generalized_filter_spectrum(ops)
    specs = [s for s in cfg.filter_specs() if s.kind != "none"]
    out = Path(cfg.out_dir) / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    header = ["mu"] + [s.tag() for s in specs]
    rows = []
    for value in mu:
        row = [value]
        for s in specs:
            row.append(float(rom.transfer_factor(s.kind, value, s.delta, s.m)))
        rows.append(row)
    path = out / "transfer.csv"
    matio.write_csv(path, header, rows)
    return path


def fom_single_run(cfg, y=None):
    """One full-order trajectory (default: center of the parameter box)."""
    model, _, matrices = _assemble(cfg)
    if y is None:
        y = np.zeros(model.dim)
    initial = fom.initial_step_state(matrices)
    n_steps = int(round(cfg.fom_t_final / cfg.fom_dt))
    snapshots, times, _, energies, _ = fom.run_trajectory(
        initial, matrices, y, cfg.fom_dt, n_steps,
        stride=cfg.fom_snapshot_stride, record_energy=True,
    )
    params = np.tile(np.atleast_1d(y), (snapshots.shape[1], 1))
    snaps = pod.SnapshotSet(data=snapshots, mass=matrices.mass, times=times, params=params)
    out = Path(cfg.out_dir) / "fom_run"
    out.mkdir(parents=True, exist_ok=True)
    fom.save_snapshot_set(out, snaps, cfg.fom_dt, cfg.fom_snapshot_stride)
    all_times = cfg.fom_dt * np.arange(n_steps + 1)
    matio.write_csv(
        out / "energy.csv", ["t", "energy"],
        ((all_times[i], energies[i]) for i in range(n_steps + 1)),
    )
    return out


def fom_window_energy_qoi(cfg, y):
    """Time-averaged full-order energy over the reduced comparison window."""
    _, _, matrices = _assemble(cfg)
    initial = fom.initial_step_state(matrices)
    dt = cfg.fom_dt
    k0 = int(round(cfg.rom_start_time() / dt))
    n_steps = int(round(cfg.fom_t_final / dt))
    _, _, _, energies, _ = fom.run_trajectory(
        initial, matrices, y, dt, n_steps, stride=n_steps, record_energy=True
    )
    return float(np.mean(energies[k0:]))


def run_mc_oracle(cfg, n_samples=None, seed=None):
    """Monte Carlo estimate of the expected window-averaged energy."""
    model = cfg.model()
    n = cfg.uq_mc_samples if n_samples is None else int(n_samples)
    s = cfg.uq_seed if seed is None else int(seed)
    mean, stderr = uq.mc_oracle(
        model, functools.partial(fom_window_energy_qoi, cfg), n, s, return_stderr=True
    )
    return mean, stderr, n, s


# --- verification suite ------------------------------------------------------


def check_grid_cardinalities(counts=None):
    expected = {(1, 3): 9, (1, 6): 65, (5, 1): 11, (5, 4): 801}
    counts = counts or {key: uq.smolyak_grid(*key).n_points for key in expected}
    ok = counts == expected
    got = "/".join(str(counts[k]) for k in ((1, 3), (1, 6), (5, 1), (5, 4)))
    return ok, f"point counts {got} (expected 9/65/11/801)"


def check_weight_normalization(grids=None):
    if grids is None:
        grids = [uq.smolyak_grid(d, l) for d in (1, 2, 5) for l in range(0, 4)]
    worst = max(abs(math.fsum(g.weights) - 1.0) for g in grids)
    return worst <= 1e-12, f"max |sum(w) - 1| = {worst:.3e}"


def check_uniform_moments():
    worst = 0.0
    for level in (1, 2, 3):
        grid = uq.smolyak_grid(1, level)
        y = grid.points[0]
        worst = max(
            worst,
            abs(uq.expectation(np.ones_like(y), grid) - 1.0),
            abs(uq.expectation(y, grid)),
            abs(uq.expectation(y * y, grid) - 1.0 / 3.0),
        )
    return worst <= 1e-12, f"max moment error = {worst:.3e}"


def check_total_degree_exactness():
    # Smolyak with this nested family integrates total degree <= 2L + 1
    worst = 0.0
    for dim, level in ((2, 2), (3, 1), (5, 1)):
        grid = uq.smolyak_grid(dim, level)
        max_degree = 2 * level + 1
        for powers in _monomials(dim, max_degree):
            vals = np.ones(grid.n_points)
            for i, p in enumerate(powers):
                if p:
                    vals = vals * grid.points[i] ** p
            exact = 1.0
            for p in powers:
                exact *= 0.0 if p % 2 else 1.0 / (p + 1)
            worst = max(worst, abs(uq.expectation(vals, grid) - exact))
    return worst <= 1e-12, f"max quadrature error = {worst:.3e}"


def _monomials(dim, max_total):
    if dim == 0:
        yield ()
        return
    for p in range(max_total + 1):
        for rest in _monomials(dim - 1, max_total - p):
            yield (p,) + rest


def check_pod_optimality():
    from efrrom import linalg

    grid = fom.FomGrid(65)
    model = uq.RandomViscosityModel("constant1d", nu0=2e-3)
    matrices = fom.assemble_fom(grid, uq.affine_components(model))
    initial = fom.initial_step_state(matrices)
    snaps = fom.fom_run(initial, matrices, np.zeros(1), 2e-3, 0.196, 2)
    r = 5
    basis = pod.build_pod(snaps, r)
    total = 0.0
    for j in range(snaps.n_snapshots):
        u = snaps.data[:, j]
        residual = u - pod.reconstruct(basis, pod.project(basis, u, snaps.mass))
        total += linalg.weighted_inner(residual, residual, snaps.mass)
    tail = float(np.sum(basis.eigenvalues[r:]))
    rel = abs(total - tail) / max(tail, 1e-300)
    return rel <= 1e-8, f"projection-error identity relative mismatch = {rel:.3e}"


def check_filter_closed_forms():
    mu = np.array([0.5, 2.0, 10.0, 400.0])
    r = mu.shape[0]
    ops = rom.ROMOperators(
        r=r, mass=np.eye(r), stiffness_components=[np.diag(mu)],
        stiffness_mean=[np.zeros(r)], quadratic=np.zeros((r, r, r)),
        conv_mean_left=np.zeros((r, r)), conv_mean_right=np.zeros((r, r)),
        conv_mean_mean=np.zeros(r), forcing=np.zeros(r),
        stiffness_filter=np.diag(mu), energy_const=0.0, energy_lin=np.zeros(r),
    )
    w = np.array([1.0, -2.0, 0.5, 3.0])
    worst = 0.0
    for delta in (0.0, 1e-2, 0.3):
        for m in (1, 2, 4):
            for kind in ("df", "hodf_v1", "hodf_v2"):
                got = rom.filter_apply(w, ops, FilterSpec(kind=kind, delta=delta, m=m))
                want = rom.transfer_factor(kind, mu, delta, m) * w
                worst = max(worst, float(np.max(np.abs(got - want))))
    return worst <= 1e-12, f"max closed-form mismatch = {worst:.3e}"


def check_mc_vs_scm(n_samples=20000, seed=1234):
    model = uq.RandomViscosityModel("constant1d")
    grid = uq.smolyak_grid(1, 3)

    def quartic(y):
        y = float(np.atleast_1d(y)[0])
        return 1.0 + y + y**2 + y**3 + y**4

    scm = uq.expectation(np.array([quartic(y) for y in grid.points[0]]), grid)
    mc, stderr = uq.mc_oracle(model, quartic, n_samples, seed, return_stderr=True)
    gap = abs(mc - scm)
    return gap <= 3.0 * stderr, f"|MC - SCM| = {gap:.3e} vs 3*stderr = {3 * stderr:.3e}"


def check_viscosity_positivity():
    lows = []
    model_1d = uq.RandomViscosityModel("constant1d")
    lows.append(uq.min_viscosity_on_grid(model_1d, uq.smolyak_grid(1, 6)))
    model_5d = uq.RandomViscosityModel("kl5d")
    lows.append(uq.min_viscosity_on_grid(model_5d, uq.smolyak_grid(5, 4)))
    worst = min(lows)
    return worst > 0.0, f"smallest viscosity over grid points = {worst:.6e}"


VERIFY_CHECKS = (
    ("grid-cardinalities", check_grid_cardinalities),
    ("weight-normalization", check_weight_normalization),
    ("uniform-moments", check_uniform_moments),
    ("total-degree-exactness", check_total_degree_exactness),
    ("pod-optimality", check_pod_optimality),
    ("filter-closed-forms", check_filter_closed_forms),
    ("mc-vs-scm", check_mc_vs_scm),
    ("viscosity-positivity", check_viscosity_positivity),
)


def verify(cfg=None):
    """Run the invariant suite; returns ``[(name, ok, detail), ...]``."""
    results = []
    for name, check in VERIFY_CHECKS:
        ok, detail = check()
        results.append((name, bool(ok), detail))
    return results
