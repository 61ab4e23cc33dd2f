"""Build script for the optional compiled warp kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes candidate patch extraction
faster. Requires Cython and NumPy headers, so install with
``pip install -e . --no-build-isolation``.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "collabtrack._warp_fast",
                sources=["src/collabtrack/_warp_fast.pyx"],
                include_dirs=[numpy.get_include()],
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
except ImportError:
    pass

setup(ext_modules=ext_modules)
