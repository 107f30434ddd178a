"""Sparse-grid stochastic collocation and the two random-viscosity models.

The 1D rule places nodes at Chebyshev extrema with the nested growth
``n = 2^level + 1`` (single midpoint at level 0); weights include the uniform
probability density on ``[-1, 1]``, so every rule sums to one. Multi-d grids
use the Smolyak combination with total-level selection ``sum(l_i) <= L``,
which reproduces the training/collocation point counts 9, 65, 11 and 801 used
throughout the experiments. Nodes are mirrored exactly around zero and shared
bit-identically across levels, so nestedness and duplicate merging are exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from efrrom.errors import (
    DimensionError,
    PositivityError,
    RangeError,
    ValidationError,
)


def cc_rule(level):
    """Clenshaw-Curtis nodes and uniform-density weights on ``[-1, 1]``.

    Nodes ascend; weights sum to one. The rule is exact for polynomials of
    degree ``n - 1`` against the uniform density (and odd degrees by
    symmetry).
    """
    if level < 0:
        raise RangeError(f"level must be >= 0, got {level}")
    if level == 0:
        return np.array([0.0]), np.array([1.0])
    big_n = 2**level
    n = big_n + 1
    nodes = np.empty(n)
    for j in range(big_n // 2 + 1):
        x = -math.cos(math.pi * (j / big_n))
        nodes[j] = x
        nodes[big_n - j] = -x
    nodes[big_n // 2] = 0.0
    half = big_n // 2
    weights = np.empty(n)
    for k in range(half + 1):
        acc = 1.0
        for j in range(1, half + 1):
            b = 1.0 if j == half else 2.0
            acc -= b * math.cos(2.0 * math.pi * j * k / big_n) / (4.0 * j * j - 1.0)
        c = 1.0 if k in (0, big_n) else 2.0
        w = c * acc / big_n
        weights[k] = w
        weights[big_n - k] = w
    # formula indexes descending Chebyshev nodes; mirror symmetry makes the
    # ascending order carry identical weights
    return nodes, 0.5 * weights


@dataclass(frozen=True)
class SparseGrid:
    """Collocation nodes (``dim x n_points`` columns) with quadrature weights
    for the uniform density on the reference cube ``[-1, 1]^dim``."""

    dim: int
    level: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self):
        return self.points.shape[1]


def smolyak_grid(dim, level):
    """Smolyak combination of the nested Clenshaw-Curtis family.

    Duplicate points across anisotropic tensor grids are merged exactly
    (all node values are drawn bit-identically from the finest 1D rule).
    """
    if dim < 1:
        raise RangeError(f"dim must be >= 1, got {dim}")
    if level < 0:
        raise RangeError(f"level must be >= 0, got {level}")
    rules = [cc_rule(l) for l in range(level + 1)]
    finest_nodes = rules[level][0]

    def finest_index(lvl, k):
        if lvl == 0:
            return 2 ** (level - 1) if level > 0 else 0
        return k * 2 ** (level - lvl)

    accum = {}
    for levels in _level_vectors(dim, level):
        total = sum(levels)
        deficit = level - total
        if deficit > dim - 1:
            continue
        coeff = (-1.0) ** deficit * math.comb(dim - 1, deficit)
        per_dim = [
            [(finest_index(l, k), rules[l][1][k]) for k in range(rules[l][0].shape[0])]
            for l in levels
        ]
        for combo in _tensor(per_dim):
            key = tuple(idx for idx, _ in combo)
            w = coeff
            for _, wk in combo:
                w *= wk
            accum[key] = accum.get(key, 0.0) + w
    keys = sorted(accum.keys())
    points = np.empty((dim, len(keys)))
    weights = np.empty(len(keys))
    for col, key in enumerate(keys):
        for row, idx in enumerate(key):
            points[row, col] = finest_nodes[idx]
        weights[col] = accum[key]
    total_weight = math.fsum(weights)
    if abs(total_weight - 1.0) > 1e-12:
        raise ValidationError(f"sparse-grid weights sum to {total_weight!r}, expected 1")
    return SparseGrid(dim=dim, level=level, points=points, weights=weights)


def _level_vectors(dim, level):
    if dim == 1:
        for l in range(level + 1):
            yield (l,)
        return
    for head in range(level + 1):
        for tail in _level_vectors(dim - 1, level - head):
            yield (head,) + tail


def _tensor(per_dim):
    if len(per_dim) == 1:
        for item in per_dim[0]:
            yield (item,)
        return
    for item in per_dim[0]:
        for rest in _tensor(per_dim[1:]):
            yield (item,) + rest


def expectation(values, grid):
    """Quadrature expectation ``sum_j w_j values_j`` in fixed node order."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != grid.n_points:
        raise DimensionError(
            f"need one value per grid point ({grid.n_points}), got shape {values.shape}"
        )
    return math.fsum(w * v for w, v in zip(grid.weights, values))


def export_grid_csv(path, points, weights):
    """Write ``index,y_1..y_d,weight`` rows for a (mapped) point set."""
    from efrrom import matio

    dim = points.shape[0]
    header = ["index"] + [f"y_{i + 1}" for i in range(dim)] + ["weight"]
    rows = (
        [str(j)] + [points[i, j] for i in range(dim)] + [weights[j]]
        for j in range(points.shape[1])
    )
    matio.write_csv(path, header, rows)


# --- random viscosity -------------------------------------------------------

KL_BOX_X1 = 2.2
KL_BOX_X2 = 0.41


@dataclass(frozen=True)
class RandomViscosityModel:
    """Affine-in-y random viscosity; ``constant1d`` or ``kl5d``.

    ``constant1d`` is the single uniform variable scaling a constant base
    viscosity by ``1 + y/10``. ``kl5d`` is the truncated Karhunen-Loeve
    field with correlation length ``corr_length``; its planar coordinates are
    traced diagonally onto the unit interval (``x1 = 2.2 x``, ``x2 = 0.41 x``).
    """

    variant: str
    nu0: float = 8.0e-4
    c: float = 1.0
    corr_length: float = 0.01
    q: int = 2

    def __post_init__(self):
        if self.variant not in ("constant1d", "kl5d"):
            raise ValidationError(f"unknown viscosity variant {self.variant!r}")

    @property
    def dim(self):
        return 1 if self.variant == "constant1d" else 1 + 2 * self.q

    @property
    def half_width(self):
        """Half-width of the symmetric parameter box per coordinate."""
        return 1.0 if self.variant == "constant1d" else math.sqrt(3.0)

    def map_points(self, reference_points):
        """Affinely map reference-cube nodes onto the parameter box."""
        return reference_points * self.half_width

    def __call__(self, x, y):
        if self.variant == "constant1d":
            return viscosity_constant1d(float(np.asarray(y).reshape(-1)[0]), self.nu0) * np.ones_like(
                np.asarray(x, dtype=float)
            )
        return viscosity_kl5d(x, y, c=self.c, corr_length=self.corr_length, q=self.q)


def viscosity_constant1d(y, nu0=8.0e-4):
    """Constant-in-space viscosity ``nu0 * (1 + y/10)`` for ``y in [-1, 1]``."""
    if not -1.0 - 1e-12 <= y <= 1.0 + 1e-12:
        raise RangeError(f"y must lie in [-1, 1], got {y}")
    return nu0 * (1.0 + y / 10.0)


def kl_eigenvalue_sqrt(j, corr_length):
    """Square-rooted eigenvalue of the exponential-covariance KL expansion."""
    return math.sqrt(math.sqrt(math.pi) * corr_length) * math.exp(
        -((j * math.pi * corr_length) ** 2) / 8.0
    )


def viscosity_kl5d(x, y, c=1.0, corr_length=0.01, q=2):
    """Truncated KL viscosity field evaluated on the unit interval.

    ``y`` has ``1 + 2q`` entries: the flat mode then a sine/cosine pair per
    retained term. Raises if the result is not strictly positive, which
    indicates a misconfigured model.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != 1 + 2 * q:
        raise DimensionError(f"y must have {1 + 2 * q} entries, got {y.shape[0]}")
    x1 = KL_BOX_X1 * x
    x2 = KL_BOX_X2 * x
    acc = c + math.sqrt(math.sqrt(math.pi) * corr_length / 2.0) * y[0]
    acc = acc * np.ones_like(x)
    for j in range(1, q + 1):
        root_xi = kl_eigenvalue_sqrt(j, corr_length)
        acc = acc + root_xi * (
            np.sin(j * math.pi * x1 / KL_BOX_X1) * np.sin(j * math.pi * x2 / KL_BOX_X2) * y[2 * j - 1]
            + np.cos(j * math.pi * x1 / KL_BOX_X1) * np.cos(j * math.pi * x2 / KL_BOX_X2) * y[2 * j]
        )
    result = acc / 1000.0
    if np.any(result <= 0.0):
        raise PositivityError("KL viscosity is not strictly positive for this (x, y)")
    return result if result.ndim else float(result)


def affine_components(model):
    """Spatial component functions with ``nu(x, y) = c_0(x) + sum c_l(x) y_l``."""
    if model.variant == "constant1d":

        def offset(x, nu0=model.nu0):
            return nu0 * np.ones_like(np.asarray(x, dtype=float))

        def slope(x, nu0=model.nu0):
            return nu0 / 10.0 * np.ones_like(np.asarray(x, dtype=float))

        return [offset, slope]

    comps = []

    def offset(x, c=model.c):
        return c / 1000.0 * np.ones_like(np.asarray(x, dtype=float))

    def flat(x, l=model.corr_length):
        return math.sqrt(math.sqrt(math.pi) * l / 2.0) / 1000.0 * np.ones_like(
            np.asarray(x, dtype=float)
        )

    comps.append(offset)
    comps.append(flat)
    for j in range(1, model.q + 1):
        root_xi = kl_eigenvalue_sqrt(j, model.corr_length)

        def sin_part(x, j=j, root_xi=root_xi):
            x = np.asarray(x, dtype=float)
            return root_xi / 1000.0 * np.sin(j * math.pi * x) * np.sin(j * math.pi * x)

        def cos_part(x, j=j, root_xi=root_xi):
            x = np.asarray(x, dtype=float)
            return root_xi / 1000.0 * np.cos(j * math.pi * x) * np.cos(j * math.pi * x)

        comps.append(sin_part)
        comps.append(cos_part)
    return comps


def min_viscosity_on_grid(model, grid, n_x=101):
    """Smallest viscosity value over mapped grid nodes (and space, for kl5d)."""
    ys = model.map_points(grid.points)
    xs = np.linspace(0.0, 1.0, n_x)
    smallest = math.inf
    for j in range(ys.shape[1]):
        vals = model(xs, ys[:, j])
        smallest = min(smallest, float(np.min(vals)))
    return smallest


def mc_oracle(model, qoi_runner, n_samples, seed, return_stderr=False):
    """Plain Monte Carlo mean of ``qoi_runner(y)`` over the parameter box.

    Deterministic for a fixed seed; the reduction is done in sample order.
    """
    if n_samples < 1:
        raise RangeError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    hw = model.half_width
    samples = rng.uniform(-hw, hw, size=(int(n_samples), model.dim))
    values = np.array([float(qoi_runner(y)) for y in samples])
    mean = math.fsum(values) / n_samples
    if not return_stderr:
        return mean
    if n_samples > 1:
        stderr = float(np.std(values, ddof=1)) / math.sqrt(n_samples)
    else:
        stderr = math.inf
    return mean, stderr
