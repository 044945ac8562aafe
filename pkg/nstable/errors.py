#!/usr/bin/env python3
"""Exception hierarchy shared by the nstable modules."""


class NStableError(Exception):
    """Base class for every error raised by the toolkit."""


class ParameterError(NStableError, ValueError):
    """A family, law or exponent was built with parameters outside its range."""


class DomainError(NStableError, ValueError):
    """A numerical operation was asked to work outside its domain."""

    def __init__(self, operation: str, message: str):
        super().__init__(f"{operation}: {message}")
        self.operation = operation


class UnsupportedError(NStableError):
    """The requested representation is not available for this object."""


class ConfigError(NStableError):
    """Invalid experiment configuration (unknown names, bad grids, unreadable files)."""
