import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-python fallback backend is selected at import time; the package
    # still works without the compiled core.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "efrrom._kernels._core",
                ["src/efrrom/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
