"""Global solution curves ``(lam, u(0))``, turning points and guide crossings."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PreconditionError, PreconditionViolated, UnsupportedFamily
from .ivp import Direction, EventSpec
from .problems import (
    Family,
    GeneratingSolution,
    ProblemSpec,
    guiding_solution,
    origin_value,
    solve_generating,
    turn_indicator,
)

__all__ = [
    "CurvePoint",
    "InequalityCheck",
    "SolutionCurve",
    "TurnDirection",
    "TurningPoint",
    "check_inequality_44",
    "count_turns_and_crossings",
    "lambda_bound_check",
    "trace",
]

FD_RELATIVE_STEP = 1e-4
CROSSING_NOISE_FLOOR = 1e-13


class TurnDirection(str, enum.Enum):
    """Sense of travel in ``lam`` before the turn."""

    RIGHT_TO_LEFT = "RightToLeft"
    LEFT_TO_RIGHT = "LeftToRight"


@dataclass(frozen=True)
class CurvePoint:
    t: float
    lam: float
    u0: float
    indicator: float


@dataclass(frozen=True)
class TurningPoint:
    """Refined zero of ``lam'(t)``.

    ``second_derivative`` is the centred difference of ``lam`` with step
    ``fd_step``; ``second_derivative_error`` estimates its error from the
    same difference at half the step.  ``lambda_offset`` is ``lam - lam*``
    when a guiding solution exists (computed without cancellation).
    """

    t_n: float
    lambda_n: float
    u0_n: float
    second_derivative: float
    second_derivative_error: float
    fd_step: float
    direction: TurnDirection
    lambda_offset: float | None = None


@dataclass(frozen=True, eq=False)
class SolutionCurve:
    spec: ProblemSpec
    t: np.ndarray
    lam: np.ndarray
    u0: np.ndarray
    indicator: np.ndarray
    turns: tuple[TurningPoint, ...]
    guiding_crossings: tuple[float, ...]
    lambda_star: float | None
    solution: GeneratingSolution | None = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.t, self.lam, self.u0, self.indicator):
            arr.setflags(write=False)

    @property
    def points(self) -> list[CurvePoint]:
        return [
            CurvePoint(float(a), float(b), float(c), float(d))
            for a, b, c, d in zip(self.t, self.lam, self.u0, self.indicator)
        ]

    @property
    def t_end(self) -> float:
        return float(self.t[-1])


def _event_indicators(sol_spec: ProblemSpec, guided: bool):
    """Turn and crossing indicators expressed in trajectory variables."""
    spec = sol_spec
    if guided:
        if spec.family is Family.GELFAND_EXP:
            turn = lambda s, y: y[1]  # noqa: E731
        else:
            turn = lambda s, y: -y[1]  # noqa: E731
        return turn, (lambda s, y: y[0]), 0.0
    w0 = origin_value(spec)
    turn = lambda t, y: turn_indicator(spec, t, w0 + y[0], y[1])  # noqa: E731
    try:
        g = guiding_solution(spec)
    except UnsupportedFamily:
        return turn, None, 0.0
    if g.form == "log-linear":
        A, beta = g.A, g.beta
        cross = lambda t, y: w0 + y[0] - (A - beta * math.log(t))  # noqa: E731
    else:
        c0, beta = g.c0, g.beta
        cross = lambda t, y: w0 + y[0] - c0 * t**beta  # noqa: E731
    return turn, cross, CROSSING_NOISE_FLOOR


def _lambda_curvature(sol: GeneratingSolution, t_n: float):
    """Centred second difference of ``lam`` at ``t_n`` and an error estimate."""
    key = "lambda_offset" if sol.lambda_star is not None else "lam"
    t_hi = sol.t_end
    h = FD_RELATIVE_STEP * t_n
    if t_n + h > t_hi:
        h = 0.5 * (t_hi - t_n)

    def second_difference(step):
        vals = sol.sample([t_n - step, t_n, t_n + step])[key]
        return (vals[0] - 2.0 * vals[1] + vals[2]) / step**2, np.max(np.abs(vals))

    d_full, scale = second_difference(h)
    d_half, _ = second_difference(0.5 * h)
    roundoff = 8.0 * np.finfo(float).eps * scale / (0.25 * h * h)
    return float(d_full), float(abs(d_full - d_half) / 3.0 + roundoff), float(h)


def _turning_points(sol: GeneratingSolution, events) -> tuple[TurningPoint, ...]:
    if not events:
        return ()
    tr = sol.trajectory
    times = np.array([e.t for e in events])
    t_phys = np.exp(times) if sol.guided else times
    s = sol.sample(t_phys)
    out = []
    for k, ev in enumerate(events):
        # sign of the indicator on the step that detected the crossing
        j = max(int(np.searchsorted(tr.nodes, ev.t, side="left")) - 1, 0)
        left = sol.sample(math.exp(tr.nodes[j]) if sol.guided else tr.nodes[j])["indicator"][0]
        direction = TurnDirection.RIGHT_TO_LEFT if left > 0 else TurnDirection.LEFT_TO_RIGHT
        lpp, lpp_err, step = _lambda_curvature(sol, float(t_phys[k]))
        offset = float(s["lambda_offset"][k]) if "lambda_offset" in s else None
        out.append(
            TurningPoint(
                t_n=float(t_phys[k]),
                lambda_n=float(s["lam"][k]),
                u0_n=float(s["u0"][k]),
                second_derivative=lpp,
                second_derivative_error=lpp_err,
                fd_step=step,
                direction=direction,
                lambda_offset=offset,
            )
        )
    return tuple(out)


def trace(
    spec: ProblemSpec,
    t_max: float | None = None,
    samples_per_decade: int = 200,
    *,
    guided: bool | None = None,
) -> SolutionCurve:
    """Sample the solution curve of ``spec`` log-uniformly in ``t``.

    Parameters
    ----------
    spec : ProblemSpec
    t_max : float, optional
        End of the window (defaults to ``spec.t_max``).  The window also ends
        at the natural end of the generating solution.
    samples_per_decade : int
        At least 10.
    guided : bool, optional
        Force (or forbid) integration in guided variables.  Defaults to guided
        whenever a guiding solution exists.

    Returns
    -------
    SolutionCurve
        Samples, guide crossings and turning points; event times are refined
        by bisection to ``1e-14`` relative.
    """
    if samples_per_decade < 10:
        raise PreconditionError("samples_per_decade must be >= 10")
    t_max = spec.t_max if t_max is None else float(t_max)
    if guided is None:
        try:
            guiding_solution(spec)
            guided = True
        except UnsupportedFamily:
            guided = False
    turn_ind, cross_ind, floor = _event_indicators(spec, guided)
    events = [EventSpec(turn_ind, Direction.ANY, name="turn")]
    if cross_ind is not None:
        events.append(EventSpec(cross_ind, Direction.ANY, name="crossing", noise_floor=floor))
    sol = solve_generating(spec, t_max, guided=guided, events=tuple(events))

    t_end = sol.t_end
    decades = math.log10(t_end / spec.t_start)
    count = max(2, int(math.ceil(decades * samples_per_decade)) + 1)
    ts = np.geomspace(spec.t_start, t_end, count)
    ts[0], ts[-1] = spec.t_start, t_end
    s = sol.sample(ts)
    keep = np.isfinite(s["lam"]) & np.isfinite(s["u0"]) & (s["lam"] > 0)
    if spec.family is Family.POWER_PLUS_ONE:
        keep &= s["w"] > 0
    ts = ts[keep]
    lam, u0, ind = s["lam"][keep], s["u0"][keep], s["indicator"][keep]
    if not np.all(np.diff(u0) > 0):
        raise NumericalError("u(0) is not strictly increasing along the computed curve")

    turn_events = [e for e in sol.events if e.index == 0]
    cross_events = [e for e in sol.events if e.index == 1]
    crossings = tuple(float(math.exp(e.t) if guided else e.t) for e in cross_events)
    ls = sol.lambda_star
    return SolutionCurve(
        spec=spec,
        t=ts,
        lam=lam,
        u0=u0,
        indicator=ind,
        turns=_turning_points(sol, turn_events),
        guiding_crossings=crossings,
        lambda_star=ls,
        solution=sol,
    )


def count_turns_and_crossings(curve: SolutionCurve) -> tuple[int, int]:
    """Turn and guide-crossing counts; every pair of crossings must enclose a turn."""
    if curve.lambda_star is None:
        raise UnsupportedFamily("counting crossings needs a guiding solution")
    turns, crossings = len(curve.turns), len(curve.guiding_crossings)
    tn = np.array([tp.t_n for tp in curve.turns])
    gaps = zip(curve.guiding_crossings[:-1], curve.guiding_crossings[1:])
    if turns < crossings - 1 or any(not np.any((tn > a) & (tn < b)) for a, b in gaps):
        raise NumericalError(
            f"{turns} turns cannot separate {crossings} guiding crossings"
        )
    return turns, crossings


@dataclass(frozen=True)
class InequalityCheck:
    n: int
    t0: float
    lhs: float
    rhs: float
    holds: bool


def check_inequality_44(n: int, rel_tol: float = 1e-12) -> InequalityCheck:
    """Compare ``(t0 w'(t0) + 2) / w(t0)`` at ``t0 = sqrt(2n - 4)`` with the smaller
    Euler root ``(-n + 2 - sqrt((n-2)(n-10))) / 2`` for the exponential family."""
    if not n >= 10:
        raise PreconditionError("the inequality check needs n >= 10")
    spec = ProblemSpec(Family.GELFAND_EXP, n=float(n), alpha=0.0, rel_tol=rel_tol, abs_tol=1e-14)
    t0 = math.sqrt(2.0 * n - 4.0)
    sol = solve_generating(spec, t0, guided=False)
    w, dw = sol.trajectory(sol.trajectory.t_end)
    lhs = (t0 * dw + 2.0) / w
    rhs = (-n + 2.0 - math.sqrt((n - 2.0) * (n - 10.0))) / 2.0
    return InequalityCheck(n=int(n), t0=t0, lhs=float(lhs), rhs=rhs, holds=bool(lhs > rhs))


def lambda_bound_check(spec: ProblemSpec, curve: SolutionCurve, tol: float = 1e-6) -> bool:
    """True when ``max lam`` on the curve stays below ``(n-2)(alpha+2) + tol``."""
    if spec.family is not Family.GELFAND_EXP or spec.n < 10.0 + 4.0 * spec.alpha:
        raise PreconditionViolated("the bound applies to the exponential family with n >= 10 + 4 alpha")
    return bool(np.max(curve.lam) <= (spec.n - 2.0) * (spec.alpha + 2.0) + tol)

