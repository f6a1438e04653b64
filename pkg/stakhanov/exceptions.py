# =============================================================================
# Stakhanov Exceptions
# =============================================================================
#


class StakhanovError(Exception):
    pass


# Validation errors: bad inputs or bad configuration (exit code 1)
class ValidationError(StakhanovError):
    pass


class SchemaError(ValidationError):
    def __init__(self, msg, path=None, line=None):
        if path is not None and line is not None:
            msg = "%s:%i: %s" % (path, line, msg)
        elif path is not None:
            msg = "%s: %s" % (path, msg)

        super().__init__(msg)
        self.path = path
        self.line = line


class DuplicateRecordError(SchemaError):
    def __init__(self, record_id, path=None, line=None):
        super().__init__("duplicate id %s" % record_id, path=path, line=line)
        self.record_id = record_id


class InvariantViolationError(ValidationError):
    def __init__(self, msg, author_id=None):
        super().__init__(msg)
        self.author_id = author_id


class MissingInputError(ValidationError):
    def __init__(self, path):
        super().__init__("missing input file: %s" % path)
        self.path = path


class ConfigError(ValidationError):
    pass


class InfeasibleSimulationError(ConfigError):
    pass


class OutOfWindowError(ValidationError):
    def __init__(self, year):
        super().__init__("year %i is outside of the study window" % year)
        self.year = year


# Numeric errors: estimation could not produce a trustworthy result (exit code 2)
class NumericError(StakhanovError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class SeparationError(NumericError):
    def __init__(self, column):
        super().__init__(
            "quasi-separation detected, estimates diverge for: %s" % column
        )
        self.column = column


class RankDeficiencyError(NumericError):
    def __init__(self, columns):
        super().__init__(
            "design matrix is rank deficient, collinear columns: %s"
            % ", ".join(columns)
        )
        self.columns = columns


class SingularMatrixError(NumericError):
    def __init__(self, columns):
        super().__init__(
            "correlation matrix is singular, dependent columns: %s"
            % ", ".join(columns)
        )
        self.columns = columns
