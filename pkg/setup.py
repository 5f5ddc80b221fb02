"""Builds the optional compiled recurrence kernel.

The package is fully functional without the extension: movetone._kernels
falls back to the numpy implementation when the compiled module is absent.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "movetone._kernels._gru_cy",
                ["src/movetone/_kernels/_gru_cy.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
