"""Build the optional compiled RK4 kernel.

The package works without it: ``ptssh.kernels`` falls back to a numpy
implementation when the extension cannot be imported.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PTSSH_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ptssh._rk4",
                    ["src/ptssh/_rk4.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
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
