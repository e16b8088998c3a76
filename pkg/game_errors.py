from typing import Any, Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class FlipDynError(Exception):
    """Base class for every error raised by the solver stack.

    ``exit_code`` is what the CLI returns when the error escapes a subcommand;
    ``context`` carries step / state / module details added on the way up.
    """

    exit_code = EXIT_SOLVER

    def __init__(self, message: str, context: Optional[dict[str, Any]] = None):
        self.message = message
        self.context = dict(context or {})
        super().__init__(self.__str__())

    def with_context(self, **context: Any) -> "FlipDynError":
        self.context.update(context)
        self.args = (self.__str__(),)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} [{details}]"


class ConfigurationError(FlipDynError):
    exit_code = EXIT_CONFIG


class ConfigParseError(ConfigurationError):
    def __init__(self, message: str, line: int, column: int, path: str = ""):
        self.line = line
        self.column = column
        super().__init__(message, {"path": path, "line": line, "column": column})


class ConfigValidationError(ConfigurationError):
    def __init__(self, errors: list[str], path: str = ""):
        self.errors = list(errors)
        summary = f"{len(self.errors)} validation error(s): " + "; ".join(self.errors)
        super().__init__(summary, {"path": path} if path else None)


class SolverError(FlipDynError):
    exit_code = EXIT_SOLVER


class DegenerateGame(SolverError):
    pass


class PureSaddleExists(SolverError):
    def __init__(self, message: str, saddle: tuple[int, int, float]):
        self.saddle = saddle
        super().__init__(message, {"row": saddle[0], "col": saddle[1], "value": saddle[2]})


class EnumerationNotClosed(SolverError):
    pass


class HorizonCapExceeded(SolverError):
    pass


class ValidityViolation(SolverError):
    def __init__(self, message: str, k: int):
        self.k = k
        super().__init__(message, {"k": k})


class InvalidStep(SolverError):
    def __init__(self, message: str, k: int):
        self.k = k
        super().__init__(message, {"k": k})


class SingularPcheck(SolverError):
    def __init__(self, message: str, k: int):
        self.k = k
        super().__init__(message, {"k": k})


class ZeroState(SolverError):
    pass


class DegenerateQuadraticForm(SolverError):
    pass


class NotPositiveDefinite(SolverError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message, {"residual": residual, "iterations": iterations})


class SingularInnerMatrix(SolverError):
    pass


class PolicyProviderError(SolverError):
    def __init__(self, message: str, k: int):
        self.k = k
        super().__init__(message, {"k": k})


class OutputValidationError(SolverError):
    pass


class ResultsIOError(FlipDynError):
    exit_code = EXIT_IO
