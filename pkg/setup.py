"""Build the optional compiled sampler kernels.

The package runs without them: ``relperceiver.kernels`` falls back to the
pure-Python implementation when the extension is absent.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("RELPERCEIVER_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "relperceiver._kernels",
            ["src/relperceiver/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={"language_level": "3", "boundscheck": False,
                                 "wraparound": False, "cdivision": True},
        )

setup(ext_modules=ext_modules)
