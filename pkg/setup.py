"""Build script for the optional compiled kernel core.

The package is fully functional without the extension: ``battrl.kernels``
falls back to the pure-Python implementation when the compiled module is
missing, so the build degrades gracefully if Cython or a C compiler is
unavailable.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/battrl/_cykernels.pyx",
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
