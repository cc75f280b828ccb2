"""Build script for the optional compiled kernels.

If Cython or a C compiler is unavailable the package installs without the
extension and falls back to the pure-Python kernels at import time.
"""
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: compiled kernels not built ({exc}); using fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc}); using fallback")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "rbsim._ckernels",
        ["src/rbsim/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception as exc:  # pragma: no cover - depends on toolchain
        print(f"warning: cythonize failed ({exc}); using fallback")
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
