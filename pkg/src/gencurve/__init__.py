"""Solution curves of self-similar radial Dirichlet problems.

Every positive radial solution of ``u'' + (n-1)/r u' + lam f(r, u) = 0`` on the
unit ball, ``u'(0) = u(1) = 0``, is a rescaling of one generating solution, so
the whole curve ``(lam, u(0))`` follows from a single initial value problem.
The package traces those curves, locates and checks turning points, computes
Morse indices, and finds symmetry-breaking solutions of the one-dimensional
Henon problem by shooting.
"""

from .curve import SolutionCurve, TurningPoint, check_inequality_44, count_turns_and_crossings, trace
from .errors import GencurveError, NumericalError, PreconditionError
from .henon import build_solutions, find_xi0, shoot
from .morse import morse_index, morse_profile, reconstruct
from .problems import Family, ProblemSpec, classify_regime, solve_generating

__all__ = [
    "Family",
    "GencurveError",
    "NumericalError",
    "PreconditionError",
    "ProblemSpec",
    "SolutionCurve",
    "TurningPoint",
    "build_solutions",
    "check_inequality_44",
    "classify_regime",
    "count_turns_and_crossings",
    "find_xi0",
    "morse_index",
    "morse_profile",
    "reconstruct",
    "shoot",
    "solve_generating",
    "trace",
]
