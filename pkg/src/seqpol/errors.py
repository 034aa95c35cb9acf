"""Exception hierarchy shared across the package.

CLI exit codes: ConfigError -> 1, DataError -> 2, everything else -> 1.
"""


class SeqpolError(Exception):
    """Base class for all package errors."""


class ConfigError(SeqpolError):
    """Invalid configuration (bad fractions, empty state spec, unknown option)."""


class DataError(SeqpolError):
    """Malformed or inconsistent input data (parse errors, schema violations)."""


class ContractError(SeqpolError):
    """A model was called with inputs that do not match what it was fitted on."""


class FitError(SeqpolError):
    """Training could not produce a valid model (degenerate data, divergence)."""


class UnsupportedModelError(SeqpolError):
    """Model kind cannot handle the requested task (e.g. risk score with K > 2)."""


class UndefinedMetricError(SeqpolError):
    """Metric has no value on the given inputs (e.g. AUROC with one class)."""
