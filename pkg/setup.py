"""Root setup config: installs the ssft-core and ssft namespace parts together."""
from setuptools import setup

_CORE = ['base', 'data', 'diffcore', 'model', 'utils']
_TOOL = ['evaluation', 'experiments', 'tables', 'tools', 'training']

_package_dir = {f'ssft.{p}': f'ssft-core/ssft/{p}' for p in _CORE}
_package_dir.update({f'ssft.{p}': f'ssft/ssft/{p}' for p in _TOOL})

setup(
    name='ssft-suite',
    version='0.1.0',
    packages=list(_package_dir),
    package_dir=_package_dir,
    install_requires=[
        "attrs>=19.3.0",
        "benchbuild>=5.3.1",
        "numpy>=1.17,<2",
        "pandas>=0.22.0",
        "PyYAML>=3.12",
        "rich>=1.3.1",
        "tabulate>=0.8.6",
    ],
    entry_points={
        "console_scripts": ['ssft = ssft.tools.driver_ssft:main',]
    },
    python_requires='>=3.6'
)
