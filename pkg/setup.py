# -*- coding: iso-8859-1 -*-
#
# phantomsync install script

import os
import re
from setuptools import setup

def getVersion():
    with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "phantomsync", "_version.py")) as inFile:
        return re.search(r'__version__\s*=\s*"([^"]+)"', inFile.read()).group(1)

setup(name='phantomsync',
      version=getVersion(),
      author='phantomsync contributors',
      classifiers=['Development Status :: 4 - Beta',
                   'Environment :: Console',
                   'Intended Audience :: Science/Research',
                   'License :: OSI Approved :: BSD License',
                   'Natural Language :: English',
                   'Operating System :: POSIX',
                   'Programming Language :: Python',
                   'Topic :: Scientific/Engineering :: Artificial Intelligence'],
      description='Zero-shot learning by synthesizing classifiers from phantom base classifiers.',
      long_description="""Learns base classifiers attached to phantom classes in a semantic embedding space, and synthesizes linear classifiers for unseen classes as similarity-weighted combinations of them. Includes phantom embedding and metric learning, class-wise cross validation, a ConSE baseline and hierarchical evaluation metrics.""",
      packages=['phantomsync'],
      scripts=['bin/phantomsync'],
      install_requires=["astropy >= 4.0",
                        "numpy >= 1.19",
                        "matplotlib >= 2.0",
                        "scipy >= 1.7",
                        "PyYAML"]
)
