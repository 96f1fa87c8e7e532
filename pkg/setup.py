"""Builds the optional compiled Ward kernel; the package falls back to pure
Python when the extension is missing."""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: install the pure-Python package only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "dmdclust._ward",
                ["src/dmdclust/_ward.pyx"],
                language="c++",
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
