import os

from setuptools import setup

ext_modules = []
if os.environ.get("STGSCALE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("stgscale.sim._kernel",
                       ["src/stgscale/sim/_kernel.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # pure-Python fallback is selected at import time
        ext_modules = []

setup(ext_modules=ext_modules)
