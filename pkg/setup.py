"""Builds the optional compiled kernel.  If Cython or a C compiler is
missing the package still installs and runs on the pure backend."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/tcmap/_sweep.pyx"],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
