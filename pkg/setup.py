import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "impulsegame._kernels",
                ["src/impulsegame/_kernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-python fallback is selected at import time; the compiled
    # kernel is an optional speedup.
    ext_modules = []

setup(ext_modules=ext_modules)
