"""Exception types shared across the package.

The CLI maps these onto exit codes: ParameterError and usage problems exit 1,
FormatError (malformed input files) exits 2, ResourceLimitError and
ConvergenceError exit 3.
"""


class ParameterError(ValueError):
    """An argument is outside its documented range."""


class UnsupportedConfigError(ValueError):
    """Arity or backend combination the implementation does not handle."""


class FormatError(ValueError):
    """Malformed instance, assignment, or distribution file."""


class ResourceLimitError(RuntimeError):
    """A size cap (e.g. Kikuchi vertex count) would be exceeded."""


class ConvergenceError(RuntimeError):
    """Iterative estimator ran out of iterations.

    Carries the best estimate seen so far.
    """

    def __init__(self, message: str, best_estimate: float, iterations: int):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.iterations = iterations
