"""Build the optional compiled kernels; the package imports without them."""
import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FORCE_RL_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("Cython not available; installing pure-Python kernels only", file=sys.stderr)
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "force_rl._ckernels",
                    ["src/force_rl/_ckernels.pyx"],
                    extra_compile_args=["-O3"] if sys.platform != "win32" else ["/O2"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
