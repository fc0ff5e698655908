"""Build script for the optional compiled kernels.

The Cython extension is optional: if it fails to compile, the package
installs anyway and ``ntfsep.kernels`` falls back to the NumPy code.
"""
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} not built ({exc})", file=sys.stderr)


def extensions():
    if os.environ.get("NTFSEP_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "ntfsep._kernels",
        ["src/ntfsep/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # fast-math lets gcc vectorise exp/log through libmvec; it is passed
        # at compile time only so crtfastmath (flush-to-zero) is not linked
        extra_compile_args=["-O3", "-ffast-math"],
        # glibc's vector math library provides the vectorised exp/log
        libraries=["mvec", "m"] if sys.platform.startswith("linux") else [],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
