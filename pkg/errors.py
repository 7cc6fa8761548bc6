"""
Exception hierarchy for the QSL toolkit.

Validation problems derive from ValueError and the HTTP layer answers them with
400. The CLI exits with 2 on configuration errors and with 1 on failures while
a job runs, such as a missing gate time or unpaired sweep results.
"""


class QslKitError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(QslKitError, ValueError):
    """Invalid job, model, field or optimizer configuration."""


class FieldDomainError(QslKitError, ValueError):
    """A field value lies on or outside the open interval of its bounds."""


class GateModelMismatchError(QslKitError, ValueError):
    """Gate qubit count does not match the model's logical subspace."""


class MissingGateTimeError(QslKitError, ValueError):
    """A circuit uses a gate the platform profile has no time entry for."""


class UnpairedResultsError(QslKitError, ValueError):
    """Reduction statistics were requested for results without a partner."""


class NumericError(QslKitError, ArithmeticError):
    """Non-finite numbers showed up during propagation or optimization."""
