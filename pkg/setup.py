"""Optional build of the compiled Foldy kernels.

If Cython or a compiler is unavailable the package installs without the
extension and falls back to the NumPy kernels at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("DIMERWAVE_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("dimerwave.foldy._kernels", ["src/dimerwave/foldy/_kernels.pyx"],
                       include_dirs=[np.get_include()], extra_compile_args=["-O3"],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
