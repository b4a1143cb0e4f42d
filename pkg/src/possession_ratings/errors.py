"""Exception types shared across the pipeline.

Each class carries a short machine-readable ``code`` used by the CLI when it
reports a failure on a single line.
"""


class RatingError(Exception):
    code = "E_GENERIC"


class ConfigurationError(RatingError, ValueError):
    code = "E_CONFIG"


class DataFormatError(RatingError, ValueError):
    """Malformed input record. ``record`` is the 0-based record/line index."""

    code = "E_FORMAT"

    def __init__(self, message, record=None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class IntegrityError(RatingError, ValueError):
    code = "E_INTEGRITY"


class PlanningError(RatingError, ValueError):
    code = "E_PLAN"


class ConvergenceError(RatingError, RuntimeError):
    code = "E_CONVERGENCE"
