# errors.py
# Exception hierarchy shared by the reduction toolkit.
# Every error carries the exit code the command-line front end reports for it.

from typing import Any, Dict, List, Optional, Sequence, Tuple


class LNAReductionError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class ModelInputError(LNAReductionError, ValueError):
    """Invalid model file, configuration or user input"""

    exit_code = 2


class NetworkSyntaxError(ModelInputError):
    """DSL text that does not follow the grammar"""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnknownSymbolError(ModelInputError):
    """Reference to a species or parameter that was never declared"""

    def __init__(self, name: str, line: Optional[int] = None, column: Optional[int] = None):
        self.name = name
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}unknown symbol '{name}'")


class DuplicateDeclarationError(ModelInputError):
    """Species, parameter or reaction declared twice"""


class NetworkDomainError(ModelInputError):
    """Declaration outside its admissible domain (volume, stoichiometry, transforms)"""


class ConfigurationError(ModelInputError):
    """Reduction configuration or run options failed validation"""


class NumericalError(LNAReductionError, RuntimeError):
    """Numerical failure: divergence, instability or infeasibility"""

    exit_code = 3


class RateEvaluationError(NumericalError):
    """A rate expression produced a non-finite value"""

    def __init__(self, reaction: str, cause: str):
        self.reaction = reaction
        self.cause = cause
        super().__init__(f"reaction '{reaction}': {cause}")


class RateDomainError(NumericalError):
    """Negative reaction rate where a square root of the rate is required"""

    def __init__(self, reaction: str, value: float):
        self.reaction = reaction
        self.value = value
        super().__init__(f"reaction '{reaction}' has negative rate {value:.6g}; F = diag(sqrt(f)) is undefined")


class IntegrationError(NumericalError):
    """ODE integration failed (step-size underflow or non-finite right-hand side)"""


class ConvergenceError(NumericalError):
    """Newton or fixed-point iteration did not converge"""


class StabilityError(NumericalError):
    """A matrix required to be Hurwitz is not"""

    def __init__(self, message: str, eigenvalues: Sequence[complex] = ()):
        self.eigenvalues = list(eigenvalues)
        super().__init__(message)


class IllPosedLyapunovError(NumericalError):
    """A Lyapunov equation whose operator is (numerically) singular"""

    def __init__(self, message: str, eigenvalue_pair: Tuple[complex, complex]):
        self.eigenvalue_pair = eigenvalue_pair
        super().__init__(message)


class InfeasibleStructureError(NumericalError):
    """No structured solution of the Lyapunov inequalities was found"""

    def __init__(self, which: str, best_slack: float, blocks: List[List[int]], details: Optional[Dict[str, Any]] = None):
        self.which = which
        self.best_slack = best_slack
        self.blocks = blocks
        self.details = details or {}
        super().__init__(
            f"structured {which}-Gramian infeasible: best phase-1 slack {best_slack:.6g} > 0 "
            f"for block structure {blocks}"
        )


class SingularAlgebraicJacobianError(NumericalError):
    """Algebraic constraint Jacobian is singular: the reduced DAE is not index 1"""
