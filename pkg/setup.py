"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernels are used instead.
"""
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover
            print(f"compiled kernels disabled: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"compiled kernels disabled: {exc}")


ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("frcvp._ckernels", ["src/frcvp/_ckernels.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False,
                             "cdivision": True},
    )
except Exception as exc:  # pragma: no cover
    print(f"compiled kernels disabled: {exc}")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
