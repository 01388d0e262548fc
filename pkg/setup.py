"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
``pathrag.kernels`` falls back to the numpy implementation at import.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PATHRAG_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "pathrag.kernels._ckernels",
                    ["src/pathrag/kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # fused multiply-add would break bit-equality with numpy
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
            quiet=True,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
