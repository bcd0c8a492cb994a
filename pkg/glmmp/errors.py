"""
Exceptions raised by glm-mp.

Solvers raise SolverError (or DivergenceError) so that callers running many
instances can record the failure and move on; everything else is a plain
validation failure.
"""
import typing as t

if t.TYPE_CHECKING:
    from .solvers.base import RunResult


class GlmMpError(Exception):
    pass


class DomainError(GlmMpError, ValueError):
    """A parameter lies outside the domain of a moment or sampling function."""


class InvalidMessageError(GlmMpError, ValueError):
    """A Gaussian message with a non-finite mean or variance was supplied."""


class DegeneratePosteriorError(GlmMpError, ArithmeticError):
    """The factor has (numerically) no mass under the queried Gaussian."""


class ConfigError(GlmMpError, ValueError):
    pass


class UnsupportedChannelError(GlmMpError, ValueError):
    pass


class SolverError(GlmMpError):
    def __init__(self, msg: str, iteration: int, result: "RunResult | None" = None):
        super().__init__(f"iteration {iteration}: {msg}")
        self.iteration = iteration
        self.result = result


class DivergenceError(SolverError):
    """
    The iteration produced non-finite state, or a quantity that must stay positive
    did not. `result` holds everything recorded up to the last finite iterate.
    """
