"""Build script for the optional Cython split-search kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes boosted-tree training several times
faster. Build in place with:

    python setup.py build_ext --inplace
"""
import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "misreport.learners._split_cy",
        ["src/misreport/learners/_split_cy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
)
