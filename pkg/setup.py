"""Builds the optional compiled core; the package works without it."""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as e:  # no compiler or no Cython: pure-Python fallback
            self.warn(f"compiled core not built ({e}); using the pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            self.warn(f"compiled core not built ({e}); using the pure-Python backend")


def extensions():
    if os.environ.get("FASTGRAM_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    args = [] if os.name == "nt" else ["-O3", "-Wno-unused-function"]
    ext = Extension("fastgram._core", ["src/fastgram/_core.pyx"], include_dirs=["src/fastgram"],
                    extra_compile_args=args, depends=["src/fastgram/_vmcore.h"])
    return cythonize([ext], compiler_directives={"language_level": 3})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
