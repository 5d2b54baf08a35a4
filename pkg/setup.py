import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the package falls back at import time
    cythonize = None

NUMPY_ROOT = os.path.dirname(np.__file__)


def _ext_modules():
    if cythonize is None or os.environ.get("CVARBANDITS_NO_EXT"):
        return []
    extensions = [
        Extension(
            "cvarbandits._core",
            ["src/cvarbandits/_core.pyx"],
            include_dirs=[np.get_include()],
            library_dirs=[
                os.path.join(NUMPY_ROOT, "random", "lib"),
                os.path.join(NUMPY_ROOT, "_core", "lib"),
            ],
            libraries=["npyrandom", "npymath"],
            # no -ffast-math: kernels must round exactly like the Python fallback
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    return cythonize(extensions, compiler_directives={"language_level": "3"})


setup(ext_modules=_ext_modules())
