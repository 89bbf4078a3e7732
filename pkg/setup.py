"""Build script for the optional compiled tokenizer kernels.

The package is pure Python except for ethikit._kernels._speedups, a Cython
module accelerating the character-level tokenizer loops. If Cython (or a C
compiler) is unavailable the extension is skipped and the package falls back
to the pure-Python kernels at import time.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ethikit/_kernels/_speedups.pyx"],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
