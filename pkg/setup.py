import os

from setuptools import Extension, setup

# GRIM_PORTABLE=1 skips -march=native for builds that must run elsewhere.
flags = ["-O3"]
if os.environ.get("GRIM_PORTABLE", "") in ("", "0"):
    flags.append("-march=native")

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "grim._kernels",
                ["src/grim/_kernels.pyx"],
                include_dirs=["src/grim"],
                depends=["src/grim/_simd.h"],
                extra_compile_args=flags,
            )
        ],
        language_level=3,
    )
except ImportError:
    # Cython missing: install pure-Python; grim.executor falls back at import.
    ext_modules = []

setup(ext_modules=ext_modules)
