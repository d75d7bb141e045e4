"""

phantomsync - zero-shot classifier synthesis from phantom base classifiers

"""

from ._version import __version__
from . import errors
from . import startUp
from . import semantics
from . import synthesis
from . import training
from . import adaptation
from . import tuning
from . import conse
from . import evaluation
from . import datasets
from . import plotSettings
from . import pipelines

__all__ = ['errors', 'startUp', 'semantics', 'synthesis', 'training', 'adaptation', 'tuning', 'conse',
           'evaluation', 'datasets', 'plotSettings', 'pipelines']
