"""Build script for the optional compiled clique kernel.

The package works without the extension (a pure-Python bitset kernel is
selected at import time), so a failed Cython build must not abort the
install.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tlsreg.clique._bnb",
                ["src/tlsreg/clique/_bnb.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
