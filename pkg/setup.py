from setuptools import setup, Extension

import numpy as np
from Cython.Build import cythonize

ext = Extension(
    "llambert.classifier._kernels_c",
    ["src/llambert/classifier/_kernels_c.pyx"],
    include_dirs=[np.get_include()],
)

setup(ext_modules=cythonize(ext, language_level=3))
