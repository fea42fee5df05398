"""Exception types shared across the package."""


class IonSimError(Exception):
    """Base class for all errors raised by ionsim."""


class CapacityError(IonSimError, ValueError):
    """Register size exceeds what a dense representation is allowed to hold."""


class DimensionError(IonSimError, ValueError):
    """Operands act on different numbers of qubits."""


class DomainError(IonSimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CompletenessError(DomainError):
    """Kraus elements do not satisfy sum_k E_k^dag E_k = 1."""


class AccuracyError(IonSimError, ArithmeticError):
    """Integration drifted beyond the allowed tolerance."""


class UnregisteredTermError(IonSimError, KeyError):
    """A master-equation term has no circuit realization."""


class ConfigError(IonSimError, ValueError):
    """Invalid experiment configuration.

    ``field`` names the offending key and ``line`` the line in the source
    document, when known.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
