"""Builds the compiled sampling kernels; everything else lives in pyproject.toml.

The extension is optional at runtime — the package falls back to a pure-NumPy
implementation when the import fails — but this build compiles it by default.
"""

from Cython.Build import cythonize
from setuptools import Extension, setup

setup(
    ext_modules=cythonize(
        [
            Extension(
                "dygad._kernels._core",
                ["src/dygad/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
)
