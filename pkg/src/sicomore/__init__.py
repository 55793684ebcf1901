"""Interaction detection between two high-dimensional views via weighted hierarchical compression."""
__version__ = "0.1.0"

from .errors import (ConfigError, DataError, NumericalError, SicomoreError,  # noqa: F401
                     StageError)
