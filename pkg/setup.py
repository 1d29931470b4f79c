"""Build script for the optional compiled stepping kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes long simulations much faster.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "loihiemu.engine._kernel",
                ["src/loihiemu/engine/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
