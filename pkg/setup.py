import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DPSIR_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "dpsir._ckernels",
            ["src/dpsir/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
