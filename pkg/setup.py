"""Build script: compiles the Cython kernel lane when Cython is available.

The package works without the extension (the pure-Python kernel lane is
selected at import time), so a failed/skipped extension build is not fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dpsample._kernels._ext",
                sources=["src/dpsample/_kernels/_ext.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
