"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the pointwise matrix kernels faster.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "monopole._ckernels",
        ["src/monopole/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
