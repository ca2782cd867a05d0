import os

import numpy as np
from setuptools import setup

ext_modules = []
if os.environ.get("FRECHET_INFER_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            "src/frechet_infer/_ckernels.pyx",
            compiler_directives={"language_level": 3},
        )
        for ext in ext_modules:
            ext.include_dirs.append(np.get_include())
            ext.extra_compile_args.append("-O3")

setup(ext_modules=ext_modules)
