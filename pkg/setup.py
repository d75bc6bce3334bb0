"""Build script. The compiled kernel extension is optional: when Cython or a
C compiler is unavailable the package installs pure-Python and selects the
fallback backend at import time."""

import os

from setuptools import setup


def _extensions():
    if os.environ.get("PRESSEM_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "pressem.kernels._native",
        ["src/pressem/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        # keep float semantics identical to the pure backend (no FMA contraction)
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
