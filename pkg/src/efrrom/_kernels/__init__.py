"""Kernel backend selection.

The compiled extension (``efrrom._kernels._core``) is preferred when it has
been built; otherwise the numpy fallback (``_pure``) is used. Set
``EFRROM_BACKEND=python`` or ``EFRROM_BACKEND=compiled`` to force a choice.
Both backends expose the same functions and produce results that agree to
rounding; see ``benchmarks/backend_bench.py`` for a speed comparison.
"""

import os


def _load():
    choice = os.environ.get("EFRROM_BACKEND", "").strip().lower()
    if choice not in ("", "auto", "python", "compiled"):
        raise ImportError(f"EFRROM_BACKEND must be 'python' or 'compiled', got {choice!r}")
    if choice == "python":
        from efrrom._kernels import _pure

        return _pure
    try:
        from efrrom._kernels import _core

        return _core
    except ImportError:
        if choice == "compiled":
            raise ImportError(
                "EFRROM_BACKEND=compiled but the extension is not built; "
                "run 'pip install -e . --no-build-isolation'"
            )
        from efrrom._kernels import _pure

        return _pure


impl = _load()
BACKEND = impl.BACKEND

jacobi_sweeps = impl.jacobi_sweeps
chol_factor = impl.chol_factor
chol_solve_vec = impl.chol_solve_vec
lu_solve = impl.lu_solve
thomas_solve = impl.thomas_solve
burgers_step = impl.burgers_step
rom_evolve_step = impl.rom_evolve_step
