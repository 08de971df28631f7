from setuptools import setup, find_packages

__version__ = "0.1.0"

setup(
    name="inhomssa",
    version=__version__,
    description="Exact simulation, path couplings and multilevel estimators for time-inhomogeneous reaction networks",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "PyYAML",
        "numpy",
        "scipy",
        "arrow",
    ],
    extras_require={
        "test": ["pytest"],
    },
    entry_points={
        "console_scripts": [
            "inhomog-ssa=inhomssa.simulator.cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
)
