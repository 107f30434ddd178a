"""Plain-text file formats shared project-wide.

Matrix files: first line ``rows cols``, then ``rows`` lines of ``cols``
space-separated decimals with 17 significant digits (lossless float64
round-trip). Vectors are stored as ``n x 1`` matrices. Metadata uses flat
``key=value`` lines; CSV output uses the same 17-digit format with ``\\n``
line endings so repeated runs are byte-identical.
"""

import numpy as np

from efrrom.errors import ValidationError


def format_float(x):
    return format(float(x), ".17g")


def write_matrix(path, a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError(f"can only write 1- or 2-dimensional arrays, got ndim={a.ndim}")
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(format_float(x) for x in row))
            fh.write("\n")


def read_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValidationError(f"{path}: expected 'rows cols' header")
        rows, cols = int(header[0]), int(header[1])
        out = np.empty((rows, cols))
        for i in range(rows):
            parts = fh.readline().split()
            if len(parts) != cols:
                raise ValidationError(f"{path}: row {i} has {len(parts)} values, expected {cols}")
            out[i, :] = [float(p) for p in parts]
    return out


def write_vector(path, v):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValidationError(f"expected a vector, got ndim={v.ndim}")
    write_matrix(path, v[:, None])


def read_vector(path):
    a = read_matrix(path)
    if a.shape[1] != 1:
        raise ValidationError(f"{path}: expected a single-column matrix, got {a.shape}")
    return a[:, 0].copy()


def write_keyvalues(path, mapping):
    with open(path, "w", newline="\n") as fh:
        for key, value in mapping.items():
            if isinstance(value, float):
                value = format_float(value)
            elif isinstance(value, (list, tuple, np.ndarray)):
                value = ",".join(format_float(x) for x in value)
            fh.write(f"{key}={value}\n")


def read_keyvalues(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def write_csv(path, header, rows):
    """Write CSV with the shared float format; ``rows`` is an iterable of
    iterables whose floats are formatted to 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header))
        fh.write("\n")
        for row in rows:
            fh.write(",".join(x if isinstance(x, str) else format_float(x) for x in row))
            fh.write("\n")
