"""Build script for the compiled search kernel.

Set KNAPXBAR_NO_EXT=1 to install without the extension; the package then falls
back to the pure-Python kernel (same results, much slower).
"""

import os
from pathlib import Path

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("KNAPXBAR_NO_EXT"):
        return []
    import numpy as np
    from Cython.Build import cythonize

    # libnpyrandom provides the C entry points for the same Gaussian/uniform
    # streams numpy's Generator uses, which keeps kernel output bit-identical
    # to the fallback.
    librandom = str(Path(np.random.__file__).parent / "lib")
    ext = Extension(
        "knapxbar._kernel",
        ["src/knapxbar/_kernel.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[librandom],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
