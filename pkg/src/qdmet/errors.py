"""Exception hierarchy shared by all qdmet modules."""


class QdmetError(Exception):
    """Base class for errors raised by qdmet."""


class ParseError(QdmetError, ValueError):
    pass


class GeometryError(QdmetError, ValueError):
    pass


class ConditioningError(QdmetError):
    """Overlap matrix is (numerically) linearly dependent."""


class ContractError(QdmetError, ValueError):
    """A precondition of an operation was violated by the caller."""


class ConvergenceError(QdmetError):
    pass


class CapacityError(QdmetError):
    """Problem is larger than the dense/desk-scale limits allow."""


class SingularityError(QdmetError, ZeroDivisionError):
    pass


class FragmentationError(QdmetError):
    pass


class RootNotBracketedError(QdmetError):
    """No sign change of the electron-count residual was found.

    ``table`` holds the ``(mu, n_total)`` pairs that were probed.
    """

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


class HermiticityError(QdmetError):
    pass


class GroupingError(QdmetError, ValueError):
    pass


class CalibrationError(QdmetError):
    pass


class InversionError(QdmetError):
    pass


class EmptyFilterError(QdmetError):
    """PMSV discarded every shot."""


class ConfigError(QdmetError, ValueError):
    pass
