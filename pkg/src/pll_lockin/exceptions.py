"""Exceptions raised by the PLL range computations."""


class PLLError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameters(PLLError, ValueError):
    """Loop constants or frequency error outside their admissible domain."""


class NoEquilibria(PLLError):
    """The frequency error is outside the hold-in range, |omega| >= K_vco."""


class OutOfRange(PLLError, ValueError):
    """Argument outside the open interval an operation is defined on."""


class ConditionInapplicable(PLLError):
    """The Lyapunov global-stability condition is vacuous (lag filter, tau2 = 0)."""


class SingularPoint(PLLError, ArithmeticError):
    """A first integral was evaluated on one of its singular lines."""


class SignFlip(PLLError, ArithmeticError):
    """A logarithm argument changed sign where it must stay constant."""


class SolverError(PLLError):
    """A numerical solver could not produce an answer. CLI exit code 2."""


class NoBracket(SolverError):
    """No sign change was found on the search interval."""


class StepUnderflow(SolverError):
    """The adaptive integrator step collapsed."""


class Undecided(SolverError):
    """The integration horizon was exhausted before a predicate was decided."""
