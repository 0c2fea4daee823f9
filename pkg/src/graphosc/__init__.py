"""Oscillators on graphs and graphons: cut norms, particle simulation,
Fokker-Planck moments and a reproducible experiment harness."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    ContractError,
    DomainError,
    FormatError,
    GraphoscError,
    NumericalError,
    SizeCapError,
)
