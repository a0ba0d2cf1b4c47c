import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "softmdp._kernels",
                ["src/softmdp/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # keep a*b+c as two rounded operations so results match numpy bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
