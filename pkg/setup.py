#!/usr/bin/env python
"""Setup script for the motion-trace EMD congestion classifier."""

from pathlib import Path

from setuptools import setup, find_packages

requirements = Path(__file__).with_name('requirements.txt').read_text().splitlines()
dependencies = [line.strip() for line in requirements
                if line.strip() and not line.startswith('#')]

setup(name='motion-emd-congestion',
      include_package_data=True,
      version='0.0.1',
      description='Traffic congestion classification from EMD features of dense optical '
                  'flow traces',
      python_requires='>=3.8',
      install_requires=dependencies,
      packages=find_packages(exclude=['examples', 'test*']),
      package_dir={'motion_emd': 'motion_emd'},
      entry_points={
          'console_scripts': ['motion-emd=motion_emd.cli:main'],
      },
      )
