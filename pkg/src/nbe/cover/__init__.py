"""Cover optimisation on quotiented prefix trees."""

from .engine import *  # noqa: F401,F403
from .tree import ConfigurationError, CoverProblem, QuotientTree, Target  # noqa: F401
