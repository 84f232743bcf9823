"""Build script for the compiled recurrence kernel.

The extension is optional: if Cython or a C compiler is unavailable the
install still succeeds and the package falls back to the numpy kernel
(see convaffect.numkit.kernels).
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "convaffect.numkit._recurrence",
                ["src/convaffect/numkit/_recurrence.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
