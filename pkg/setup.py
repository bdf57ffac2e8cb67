import os

import numpy as np
from setuptools import Extension, setup

# CFARNET_PURE_PYTHON=1 skips the compiled core entirely; the package then
# runs on the numpy fallback in cfarnet._core_py.
if os.environ.get("CFARNET_PURE_PYTHON"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cfarnet._core",
                ["src/cfarnet/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
