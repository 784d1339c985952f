"""Build script: compiles the optional Cython kernel extension.

The extension is a pure speedup; the package falls back to the numpy
implementation when it is absent.  Set BIDSIM_SKIP_EXT=1 to install
without compiling.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("BIDSIM_SKIP_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "bidsim.nn._kernels",
                ["src/bidsim/nn/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
