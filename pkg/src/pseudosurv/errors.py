"""Exception types shared across the package.

Two failure families are distinguished so callers (notably the CLI) can map
them to distinct exit codes: bad inputs versus numerical breakdowns.
"""


class PseudosurvError(Exception):
    """Base class for all package errors."""


class DataError(PseudosurvError, ValueError):
    """Invalid input: schema violations, empty data, out-of-range arguments."""


class NumericError(PseudosurvError, ArithmeticError):
    """Numerical failure: non-convergence, divergence, exhausted support."""
