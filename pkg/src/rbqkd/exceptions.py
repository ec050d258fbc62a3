"""Exception types shared across the package."""


class NumericalIntegrityError(ArithmeticError):
    """A computed quantity left its mathematically allowed range.

    Raised when rounding cannot explain the deviation, which points at a
    bug or a malformed input rather than an eavesdropping effect.
    """


class DecodeFailure(Exception):
    """Strict syndrome decoding met an ambiguous coset beyond the code radius."""
