"""Exception hierarchy shared by all wienerlab modules."""


class WienerlabError(Exception):
    """Base class for all wienerlab errors."""


class InvalidInputError(WienerlabError, ValueError):
    """Malformed or out-of-contract input (bad shapes, bad values, bad files)."""


class NumericError(WienerlabError, ArithmeticError):
    """A numeric consistency check failed (NaN, excess imaginary residue, ...)."""


class IllPosedPlanError(NumericError):
    """The Wiener denominator vanishes at some frequency bin."""


class DivergedError(NumericError):
    """An iterative scheme blew up."""
