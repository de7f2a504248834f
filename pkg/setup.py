from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; _core falls back to numpy
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "threshreg._ccore",
                ["src/threshreg/_ccore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
