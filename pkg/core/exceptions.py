"""Error hierarchy shared by every risklab app.

Each class carries the exit code the management commands report for it:
1 for usage/configuration problems, 2 for I/O, 3 for numerical failures.
"""

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class RisklabError(Exception):
    exit_code = EXIT_USAGE


class ConfigurationError(RisklabError):
    """Invalid configuration value, unknown key or invalid parameter"""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(RisklabError):
    """Columns or dimensions do not match what a model was fitted on"""


class InferenceUnavailableError(RisklabError):
    """Wald inference requested on a penalized fit"""


class UnsupportedArchitectureError(RisklabError):
    pass


class UnsupportedFeatureError(RisklabError):
    pass


class SizeError(RisklabError):
    pass


class ClassError(RisklabError):
    pass


class DocumentError(RisklabError):
    """A persisted model document cannot be read"""
    exit_code = EXIT_IO


class NumericalError(RisklabError):
    exit_code = EXIT_NUMERICAL


class SingularityError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"loss became NaN at epoch {epoch}")


class UndefinedMetricError(NumericalError):
    def __init__(self, metric, replicate, message=None):
        self.metric = metric
        self.replicate = replicate
        super().__init__(
            message or f"{metric} is undefined in replicate {replicate} (no rows of the required class)"
        )


class RankError(NumericalError):
    pass
