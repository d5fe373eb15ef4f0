"""Exception hierarchy shared by every dpsir module."""


class DpsirError(Exception):
    """Base class for all errors raised by dpsir."""


class InvalidInput(DpsirError, ValueError):
    pass


class SingularCovariance(DpsirError):
    """A covariance-like matrix fell below the positive-definiteness floor."""


class RankDeficient(DpsirError):
    pass


class BudgetExceeded(DpsirError):
    pass


class DegenerateHistogram(DpsirError):
    """Every privatized histogram count was clamped to zero."""


class DegenerateSlicing(DpsirError):
    pass


class DegenerateSpectrum(DpsirError):
    pass


class DegenerateRayleigh(DpsirError):
    """The Rayleigh quotient collapsed to zero during a flow iteration."""


class ParseError(DpsirError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
