"""Single-positive multi-label learning lab.

Library + CLI for training small MLP classifiers from single positive
labels with neighbour-frequency pseudo-labels, eight BCE-style losses,
five multi-label metrics and a synthetic confusing-class benchmark.
"""

from . import data, harness, linalg, losses, metrics, mlp, pseudo  # noqa: F401
from .errors import (ConfigError, ConsistencyError, DataFormatError,  # noqa: F401
                     DomainError, NumericalError, ShapeError)

__version__ = "0.1.0"
