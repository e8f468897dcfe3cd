"""Build script for the compiled kernel extension.

``pip install .`` builds ``airwayseg._kernels`` from Cython. Set
``AIRWAYSEG_PURE=1`` in the environment to skip the extension and install the
pure-Python package only (the NumPy fallback backend is selected at import).
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("AIRWAYSEG_PURE"):
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "airwayseg._kernels",
                ["src/airwayseg/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
