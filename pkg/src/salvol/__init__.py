"""Saliency volumes and stochastic scanpaths for 360-degree images."""

from salvol.errors import *
from salvol.config import *
from salvol.fixations import *
from salvol.volume import *
from salvol.formats import *
from salvol.providers import *
from salvol.sampler import *
from salvol.metric import *
from salvol.synthetic import *
from salvol.compare import *

__python_version__ = "3.9"
__version__ = "0.1.0"
