"""Build script for the optional compiled interval kernel.

The package works without the extension; ``ficut.icp.kernel`` falls back
to a pure-Python implementation when the compiled module is missing.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ficut.icp._kernel",
                ["src/ficut/icp/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:  # no Cython or numpy at build time: ship the fallback only
    ext_modules = []

setup(ext_modules=ext_modules)
