import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the runtime falls back to _pykernel
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("SLOWBOND_NO_EXT") != "1":
    ext_modules = cythonize(
        [
            Extension(
                "slowbond._kernel",
                ["src/slowbond/_kernel.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the compiled and Python kernels must agree bitwise
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
