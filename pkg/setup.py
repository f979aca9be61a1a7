from setuptools import Extension, setup

from Cython.Build import cythonize

extensions = [
    Extension(
        "polyaurn_lda._core",
        ["src/polyaurn_lda/_core.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
