"""Builds the optional compiled kernel; the package falls back to pure Python without it."""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GCPS_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "gcps.engine._ckernel",
                    ["src/gcps/engine/_ckernel.pyx"],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
