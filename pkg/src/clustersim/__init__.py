"""Simulation toolkit for cluster states and measurement-based computation."""

from .errors import ClusterSimError, DomainError, ImpossibleBranchError, ParseError

__all__ = ["ClusterSimError", "DomainError", "ImpossibleBranchError", "ParseError"]
__version__ = "0.1.0"
