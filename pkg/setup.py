"""Build script for the optional compiled stepping kernels.

The package works without the extension (a numpy/scipy fallback is selected
at import time), so the build degrades gracefully: set FASTDIFF_SKIP_BUILD=1
to install pure-Python only.
"""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "fastdiff._kernels._speedups",
        ["src/fastdiff/_kernels/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
]

if cythonize is not None and not os.environ.get("FASTDIFF_SKIP_BUILD"):
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    ext_modules = []

setup(ext_modules=ext_modules)
