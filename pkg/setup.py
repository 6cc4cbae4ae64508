"""Build script: compiles the optional kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any build failure here downgrades to a warning instead of
aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; fall back to pure NumPy kernels."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler/toolchain missing
            warnings.warn(f"kernel extension not built ({exc}); using NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"kernel extension not built ({exc}); using NumPy fallback")


try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "cirmil._kernels._cymilstein",
                ["src/cirmil/_kernels/_cymilstein.pyx"],
                # fp-contract off keeps the arithmetic bit-identical to the
                # NumPy fallback (no fused multiply-add).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
