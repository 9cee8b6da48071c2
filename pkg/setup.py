"""Build the optional compiled engine; the package works without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("NETTREE_NO_EXTENSION", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # pure-Python install
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "nettree._cengine",
                    ["src/nettree/_cengine.pyx"],
                    language="c++",
                    # no fused multiply-add: keep arithmetic identical to Python floats
                    extra_compile_args=["-O2", "-ffp-contract=off", "-std=c++17"],
                )
            ],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
