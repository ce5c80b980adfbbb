import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# No -ffast-math here: the interpreter core must stay bit-exact IEEE so the
# compiled engine and the pure-Python fallback produce identical stores.
extensions = [
    Extension(
        "soalens.interp._vmcore",
        ["src/soalens/interp/_vmcore.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
