"""Build hook for the optional compiled optimizer kernel.

The package is pure Python if the extension fails to build; the optimizer
falls back to a numpy implementation of the same loop.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dualpost._acsa",
                sources=["src/dualpost/_acsa.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover
    print(f"skipping compiled kernel ({exc}); pure-python backend will be used")

setup(ext_modules=ext_modules)
