from setuptools import setup

# The compiled kernel is optional: if Cython/numpy are unavailable at build
# time the package installs pure-Python and commopt._kernels falls back to
# the NumPy reference implementation at import.
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "commopt._kernels._fastkern",
                ["src/commopt/_kernels/_fastkern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
