"""Build script for the optional compiled kernels.

The package works without them (a NumPy fallback is chosen at import), so a
missing compiler or Cython only produces a warning.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("SPIKEPOOL_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "spikepool._kernels",
                    ["src/spikepool/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:  # pragma: no cover
        print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
