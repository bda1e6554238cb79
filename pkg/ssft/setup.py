"""Setup config for the ssft namespace package."""
import os

from setuptools import find_namespace_packages, setup

base_dir = os.path.dirname(__file__)

with open(base_dir + '/README.md') as f:
    long_description = f.read()

setup(
    name='ssft',
    use_scm_version={
        'root': '..',
        "relative_to": __file__,
        "fallback_version": '0.1.0'
    },
    packages=find_namespace_packages(include=['ssft.*']),
    namespace_packages=["ssft"],
    setup_requires=["pytest-runner", "setuptools_scm"],
    tests_require=["pytest", "pytest-cov"],
    install_requires=[
        "attrs>=19.3.0",
        "benchbuild>=5.3.1",
        "numpy>=1.17",
        "pandas>=0.22.0",
        "PyYAML>=3.12",
        "rich>=1.3.1",
        "tabulate>=0.8.6",
        "ssft-core>=0.1.0",
    ],
    license="BSD 2-Clause",
    long_description=long_description,
    long_description_content_type="text/markdown",
    entry_points={
        "console_scripts": ['ssft = ssft.tools.driver_ssft:main',]
    },
    python_requires='>=3.6'
)
