"""Build script for the optional compiled backend.

The package is pure Python plus one Cython extension (exactabc._core) holding
the hot numerical kernels.  If Cython or a C compiler is unavailable the
build falls back to the pure-numpy backend (exactabc._core_np) selected at
import time; set EXACTABC_NO_EXT=1 to skip the extension on purpose.

By default the extension is tuned for the build machine (-march=native,
worth several-fold on the Gibbs kernel via vectorized table lookups); set
EXACTABC_PORTABLE=1 to build a generic binary instead.
"""

import os
import subprocess
import sys
import tempfile

from setuptools import setup


def _compiler_accepts(flag):
    """True if the C compiler compiles an empty program with ``flag``."""
    cc = os.environ.get("CC", "cc")
    with tempfile.TemporaryDirectory() as tmp:
        src = os.path.join(tmp, "probe.c")
        with open(src, "w") as fh:
            fh.write("int main(void) { return 0; }\n")
        try:
            res = subprocess.run(
                [cc, flag, "-o", os.path.join(tmp, "probe"), src],
                capture_output=True,
            )
        except OSError:
            return False
        return res.returncode == 0


ext_modules = []
if not os.environ.get("EXACTABC_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        compile_args = ["-O3"]
        if not os.environ.get("EXACTABC_PORTABLE") and _compiler_accepts("-march=native"):
            compile_args.append("-march=native")
        ext_modules = cythonize(
            [
                Extension(
                    "exactabc._core",
                    ["src/exactabc/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=compile_args,
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
