"""Exception taxonomy for the package.

The tree mirrors the three failure families a caller has to tell apart:
bad input (exit code 1), synthesis that is structurally or numerically
infeasible (exit code 2), and a verification run that contradicts the
claimed guarantee (exit code 3).  Numeric exceptions raised mid-algorithm
(NotHurwitz, Blowup, ...) derive from NumericError and are mapped to the
phase they occurred in by the command layer.
"""

from __future__ import annotations


class QgccError(Exception):
    """Base class for every error raised deliberately by this package."""


# --- input ----------------------------------------------------------------

class InputError(QgccError):
    """Model files, CLI arguments or specs that cannot be accepted."""


class ParseError(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class UnknownKey(InputError):
    pass


class InvalidSpec(InputError):
    pass


# --- numerics -------------------------------------------------------------

class NumericError(QgccError):
    """A numerical routine could not produce a trustworthy result."""


class NotHurwitz(NumericError):
    pass


class SingularSystem(NumericError):
    pass


class NoStabilizingSolution(NumericError):
    pass


class Blowup(NumericError):
    pass


class NonRealResult(NumericError):
    pass


class StructureMismatch(NumericError):
    pass


# --- synthesis ------------------------------------------------------------

class InfeasibleSynthesis(QgccError):
    """The requested controller does not exist for the given model and tau."""


class NotPositive(InfeasibleSynthesis):
    """Filter covariance lost its required uniform positivity margin."""


class NotPSD(InfeasibleSynthesis):
    """Control Riccati solution failed to stay positive semidefinite."""


class SingularCoupling(InfeasibleSynthesis):
    """Coupling matrix I - Y X / tau is numerically singular."""


class NoFeasibleTau(InfeasibleSynthesis):
    """No scaling parameter in the searched range admits a solution."""


# --- verification ---------------------------------------------------------

class VerificationFailure(QgccError):
    """Independent verification contradicted the synthesized guarantee."""
