"""Shared exception types."""


class HierattrError(Exception):
    """Base class for all library errors."""


class InvalidInputError(HierattrError, ValueError):
    """An argument violates a documented precondition."""


class CapacityError(HierattrError, RuntimeError):
    """The requested computation exceeds a configured enumeration limit."""
