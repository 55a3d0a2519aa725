"""Exception taxonomy shared across the package.

Each class carries the CLI exit code it maps to, so failures stay
categorizable from scripts: config (2), data (3), numeric degeneracy (4).
"""


class UrlearnError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(UrlearnError):
    """Invalid or unresolvable run configuration."""

    exit_code = 2


class ParseError(UrlearnError):
    """Malformed input file; the message names the offending line or byte offset."""

    exit_code = 3


class StructuralError(UrlearnError):
    """Well-formed input that violates a structural invariant (shapes, labels, ranges)."""

    exit_code = 3


class MissingTokenError(UrlearnError):
    """A class name with no token coverage in a word-vector file."""

    exit_code = 3


class DegeneracyError(UrlearnError):
    """Numerically degenerate problem: rank collapse or an empty spectrum."""

    exit_code = 4
