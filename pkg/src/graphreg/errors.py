"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
process exit statuses without a lookup table.
"""


class GraphRegError(Exception):
    exit_code = 1


class ConfigError(GraphRegError, ValueError):
    """Invalid hyperparameters or layer layout."""


class ShapeError(GraphRegError, ValueError):
    """Array dimensions that do not line up."""


class LabelError(GraphRegError, ValueError):
    """Label index outside ``[0, L)``."""


class GraphValidationError(GraphRegError, ValueError):
    """Self-loop, duplicate edge, negative weight or bad node id."""


class DataError(GraphRegError, ValueError):
    """Malformed or inconsistent input data (missing features, parse errors)."""


class InvalidEmbeddingError(GraphRegError, ValueError):
    pass


class SingularSystemError(GraphRegError, ArithmeticError):
    pass


class NumericFault(GraphRegError, ArithmeticError):
    """Non-finite loss or gradient during training."""

    exit_code = 2

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NonConvergenceError(GraphRegError):
    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
