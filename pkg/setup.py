"""Build script: compiles the optional Crank-Nicolson kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the compiled kernel speeds up long propagations.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "resonlab._cnkernel",
                ["src/resonlab/_cnkernel.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # -fcx-limited-range: complex multiplies without the
                # over/underflow libcalls (the stepped quantities are O(1))
                extra_compile_args=["-O3", "-fcx-limited-range", "-funroll-loops"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
