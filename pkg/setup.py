# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

from setuptools import find_packages, setup

with open("README.md", "r") as fp:
    long_description = fp.read()

setup(
    name="mmldf",
    version="0.1.0",
    description=(
        "Max-margin discriminative feature learning: a sparse linear projection "
        "trained jointly with a max-margin classifier"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    zip_safe=False,
    python_requires=">=3.8, <4",
    packages=find_packages("src"),
    package_dir={str(""): str("src")},
    entry_points={"console_scripts": ["mmldf = mmldf.core.cli.commands:main"]},
    install_requires=[
        "numpy>=1.20",
        "psutil>=5",
        "scikit-learn>=1.0",
        "scipy>=1.7",
        "wrapt>=1.10,<2.0",
    ],
    keywords=[
        "dimensionality reduction",
        "feature learning",
        "max-margin",
        "l2,1 sparsity",
    ],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Operating System :: MacOS",
        "Operating System :: POSIX",
        "Operating System :: POSIX :: Linux",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
)
