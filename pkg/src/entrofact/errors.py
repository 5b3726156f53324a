"""Typed errors raised by entrofact, each carrying the CLI exit code it maps to."""

from __future__ import annotations

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


class EntrofactError(Exception):
    """Base class for all entrofact errors."""

    exit_code: int = EXIT_ASSERTION


class ConfigError(EntrofactError, ValueError):
    """Invalid experiment configuration or command-line usage."""

    exit_code = EXIT_USAGE


class StateSpaceTooLargeError(EntrofactError, ValueError):
    """An exact computation would exceed the configured state-space cap."""

    exit_code = EXIT_RESOURCE

    def __init__(self, predicted: int, cap: int, what: str = "state space") -> None:
        self.predicted = predicted
        self.cap = cap
        super().__init__(f"{what} of {predicted} states exceeds cap {cap}; lower the size or raise --cap-states")


class NonPermissiveError(EntrofactError, ValueError):
    """A region/boundary pair admits no configuration of positive Gibbs mass."""


class ConfigurationIncompleteError(EntrofactError, KeyError):
    """A spin configuration or boundary condition misses a required vertex."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class DistanceUndefinedError(EntrofactError, ValueError):
    """Graph distance requested with an empty argument."""


class PreconditionError(EntrofactError, ValueError):
    """An operation was called outside the domain where its statement applies."""


class DomainError(EntrofactError, ValueError):
    """A numerical argument is outside the domain of a functional."""
