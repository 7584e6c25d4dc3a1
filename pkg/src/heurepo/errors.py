"""Exception hierarchy. The CLI maps each family to a fixed exit code."""

from __future__ import annotations


class HeurepoError(Exception):
    exit_code = 4


class ParseError(HeurepoError):
    """Input is missing, unreadable, or syntactically malformed."""

    exit_code = 2


class MissingFieldError(ParseError):
    pass


class ValidationError(HeurepoError):
    """Input parses but violates a data invariant."""

    exit_code = 3


class DuplicateIdError(ValidationError):
    pass


class DanglingLinkError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class UnfitModelError(ValidationError):
    pass


class StaleInputError(ValidationError):
    pass
