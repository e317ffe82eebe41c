"""Desk-scale simulation of an adaptive multimodal gesture interface.

Synthetic multimodal gesture data, three small neural encoders with
weighted fusion, federated averaging across simulated clients, tabular
Q-learning interface adaptation against a simulated user population, and a
four-metric comparison harness. Everything is seeded and reproducible.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    NumericError,
    ParameterError,
    ShapeError,
    TapeError,
    ValidationError,
)
