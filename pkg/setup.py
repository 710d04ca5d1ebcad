from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension(
            "gsmdetect._kernels",
            sources=["src/gsmdetect/_kernels.pyx"],
            extra_compile_args=["-O2", "-ffp-contract=off"],
            optional=True,
        )],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
