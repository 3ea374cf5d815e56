from setuptools import setup, find_packages
from scoutpy.__init__ import version

setup(
    name = 'scoutpy',
    version = version,
    description = "Novelty-driven exploration in a learned low-dimensional abstract state space, with labyrinth and key-maze environments",
    long_description = "See README.md for the run layout, output formats and configuration.",
    author = 'scoutpy contributors',
    license = 'License :: OSI Approved :: BSD License',
    keywords = ['reinforcement learning', 'exploration', 'novelty search', 'model-based'],
    classifiers = [
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    packages = find_packages(exclude=['contrib', 'docs', 'tests*', 'examples*']),
    package_data = {'scoutpy': ['layouts/*.txt']},
    install_requires = ['numpy>=1.17', 'pandas', 'scipy'],
    extras_require = {'test': ['pytest']},
    entry_points = {'console_scripts': ['scout = scoutpy.scoutcli:main']},
)
