"""Setup config for the ssft-core namespace package."""
from setuptools import find_namespace_packages, setup

setup(
    name='ssft-core',
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
        "benchbuild>=5.2",
        "numpy>=1.17",
        "PyYAML>=3.12",
        "rich>=1.3.1",
    ],
    python_requires='>=3.6'
)
