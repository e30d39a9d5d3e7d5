import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = os.environ.get("EDCNET_NO_EXT", "") != "1"
except ImportError:
    USE_CYTHON = False


def _extensions():
    if not USE_CYTHON:
        return []
    ext = Extension(
        "edcnet._ckernels",
        ["src/edcnet/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
