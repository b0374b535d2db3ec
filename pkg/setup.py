"""Build hook for the optional compiled scoring kernels.

The package is fully functional without the extension: profmon._backend
falls back to the NumPy implementation when profmon._kernels is missing,
so a failed compile only costs speed, not correctness.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "profmon._kernels",
                ["src/profmon/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    import warnings

    warnings.warn(f"building without compiled kernels: {exc}")

setup(ext_modules=ext_modules)
