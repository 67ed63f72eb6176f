"""Adaptive Dormand-Prince 5(4) integration with dense output and events.

The integrator is written for the small, smooth, non-stiff systems that arise
from radial second order ODEs ``w'' + (n-1)/t w' + F(t, w) = 0``.  Every
accepted step keeps the coefficients of the free quartic interpolant, so the
returned :class:`Trajectory` can be evaluated anywhere on its window and
event indicators can be refined by bisection on the dense output.

The stepping loop works on plain Python floats: the systems have two or three
components, where numpy call overhead would dominate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import NoSignChange, NonFiniteState, NumericalError, PreconditionError

__all__ = [
    "Action",
    "Direction",
    "Event",
    "EventSpec",
    "OdeSystem",
    "Termination",
    "Trajectory",
    "bisect_root",
    "integrate",
    "refine_root",
    "series_start",
]

RHS = Callable[[float, Sequence[float]], Sequence[float]]
Indicator = Callable[[float, Sequence[float]], float]

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-12
DEFAULT_T_START = 1e-6
ROOT_REL_TOL = 1e-14
ROOT_MAX_ITER = 200

# Dormand-Prince 5(4) tableau, FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array(
    [
        [0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array(
    [-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
# Free interpolant: y(t + theta h) = y + h * (K.T @ _P) @ [theta, theta^2, theta^3, theta^4]
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_EPS = float(np.finfo(float).eps)


class Termination(enum.Enum):
    REACHED_END = "ReachedEnd"
    EVENT_STOP = "EventStop"
    BLOW_UP = "BlowUp"


class Direction(enum.IntEnum):
    ANY = 0
    UP = 1
    DOWN = -1


class Action(enum.Enum):
    RECORD = "record"
    STOP = "stop"


@dataclass(frozen=True)
class OdeSystem:
    """First order system ``y' = rhs(t, y)``.

    ``rhs`` receives the state as a list of floats and returns an indexable
    sequence of floats.  ``blowup_bound`` stops integration (``Termination.BLOW_UP``)
    once the first state component exceeds it in magnitude.
    """

    rhs: RHS
    dimension: int
    singular_origin: bool = False
    blowup_bound: float | None = None
    name: str = ""


@dataclass(frozen=True)
class EventSpec:
    """Sign-change event on ``indicator(t, y)``.

    Crossings where ``|indicator|`` stays below ``noise_floor`` at both ends of
    the step are discarded.
    """

    indicator: Indicator
    direction: Direction = Direction.ANY
    action: Action = Action.RECORD
    name: str = ""
    noise_floor: float = 0.0


class Event(NamedTuple):
    index: int
    t: float
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense record of an integrated solution.

    Segment ``k`` covers ``[nodes[k], nodes[k+1]]`` and is evaluated with the
    interpolating polynomial built on the full accepted step of length
    ``steps[k]`` (the last segment is shorter than its step when a stop
    event truncated it).
    """

    nodes: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    coeffs: np.ndarray
    termination: Termination
    nfev: int = 0

    def __post_init__(self):
        for arr in (self.nodes, self.states, self.steps, self.coeffs):
            arr.setflags(write=False)

    @property
    def t_start(self) -> float:
        return float(self.nodes[0])

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def segments(self):
        """List of ``((t_left, t_right), coeffs)`` per accepted step."""
        return [
            ((float(self.nodes[k]), float(self.nodes[k + 1])), self.coeffs[k])
            for k in range(len(self.steps))
        ]

    def __call__(self, t: float) -> np.ndarray:
        if not (self.nodes[0] <= t <= self.nodes[-1]):
            raise PreconditionError(
                f"t={t!r} outside trajectory window [{self.t_start}, {self.t_end}]"
            )
        k = int(np.searchsorted(self.nodes, t, side="right")) - 1
        if self.nodes[k] == t:
            return self.states[k].copy()
        h = self.steps[k]
        th = (t - self.nodes[k]) / h
        return self.states[k] + h * (self.coeffs[k] @ np.array([th, th * th, th**3, th**4]))

    def evaluate(self, ts) -> np.ndarray:
        """Vectorised evaluation; returns an array of shape ``(len(ts), dim)``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if ts.size and (ts.min() < self.nodes[0] or ts.max() > self.nodes[-1]):
            raise PreconditionError("evaluation points outside trajectory window")
        k = np.clip(np.searchsorted(self.nodes, ts, side="right") - 1, 0, len(self.steps) - 1)
        h = self.steps[k]
        theta = (ts - self.nodes[k]) / h
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)
        out = self.states[k] + h[:, None] * np.einsum("kdj,kj->kd", self.coeffs[k], powers)
        exact = self.nodes[k] == ts
        out[exact] = self.states[k[exact]]
        out[ts == self.nodes[-1]] = self.states[-1]
        return out

    def derivative(self, ts) -> np.ndarray:
        """Time derivative of the dense interpolant, shape ``(len(ts), dim)``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if ts.size and (ts.min() < self.nodes[0] or ts.max() > self.nodes[-1]):
            raise PreconditionError("evaluation points outside trajectory window")
        k = np.clip(np.searchsorted(self.nodes, ts, side="right") - 1, 0, len(self.steps) - 1)
        theta = (ts - self.nodes[k]) / self.steps[k]
        dpow = np.stack([np.ones_like(theta), 2 * theta, 3 * theta**2, 4 * theta**3], axis=-1)
        return np.einsum("kdj,kj->kd", self.coeffs[k], dpow)


def series_start(
    origin_value: float,
    origin_forcing: float,
    n: float,
    alpha: float,
    t_start: float = DEFAULT_T_START,
) -> np.ndarray:
    """Regular start of ``w'' + (n-1)/t w' + t^alpha F(w) = 0`` away from ``t = 0``.

    Uses ``w = w(0) + c t^(alpha+2)`` with ``c = -F(w(0)) / ((alpha+2)(alpha+n))``;
    ``origin_forcing`` is ``F(w(0))``.  Returns ``[w, w']`` at ``t_start``.
    """
    c = -origin_forcing / ((alpha + 2.0) * (alpha + n))
    w = origin_value + c * t_start ** (alpha + 2.0)
    dw = c * (alpha + 2.0) * t_start ** (alpha + 1.0)
    return np.array([w, dw])


def _rms(x) -> float:
    return math.sqrt(math.fsum(v * v for v in x) / len(x))


def _initial_step(fun, t0, y0, f0, span, rtol, atol) -> float:
    scale = [atol + abs(v) * rtol for v in y0]
    d0 = _rms([v / s for v, s in zip(y0, scale)])
    d1 = _rms([v / s for v, s in zip(f0, scale)])
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(t0 + h0, [y + h0 * f for y, f in zip(y0, f0)])
    d2 = _rms([(a - b) / s for a, b, s in zip(f1, f0, scale)]) / h0
    if not math.isfinite(d2):
        return h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _crossed(g_old: float, g_new: float, direction: Direction) -> bool:
    if g_old == 0.0 or not (g_old * g_new <= 0.0):
        return False
    if direction == Direction.UP:
        return g_old < 0.0
    if direction == Direction.DOWN:
        return g_old > 0.0
    return True


def _bisect(g: Callable[[float], float], lo: float, hi: float, g_lo: float) -> float:
    for _ in range(ROOT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= ROOT_REL_TOL * max(1.0, abs(mid)) or mid in (lo, hi):
            break
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if (g_mid < 0.0) == (g_lo < 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisect_root(g: Callable[[float], float], lo: float, hi: float) -> float:
    """Bisection for a sign change of a scalar function on ``[lo, hi]``.

    Stops once the bracket is narrower than ``1e-14 * max(1, |t|)``.
    """
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if not (math.isfinite(g_lo) and math.isfinite(g_hi)) or (g_lo < 0.0) == (g_hi < 0.0):
        raise NoSignChange(f"no sign change on [{lo!r}, {hi!r}]")
    return _bisect(g, lo, hi, g_lo)


def refine_root(traj: Trajectory, indicator: Indicator, bracket: tuple[float, float]) -> float:
    """Bisection on the dense output for a sign change of ``indicator`` in ``bracket``."""
    lo, hi = sorted(map(float, bracket))
    g_lo = indicator(lo, traj(lo))
    g_hi = indicator(hi, traj(hi))
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if (g_lo < 0.0) == (g_hi < 0.0):
        raise NoSignChange(f"indicator has equal signs at {lo!r} and {hi!r}")
    return _bisect(lambda t: indicator(t, traj(t)), lo, hi, g_lo)


def _segment(t_left: float, h: float, y, K):
    Q = np.asarray(K).T @ _P
    y = np.asarray(y)

    def seg(tt):
        th = (tt - t_left) / h
        return y + h * (Q @ np.array([th, th * th, th**3, th**4]))

    return seg


def integrate(
    sys: OdeSystem,
    t0: float,
    y0,
    t_max: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    events: Sequence[EventSpec] = (),
    *,
    breakpoints: Sequence[float] = (),
    max_step: float = math.inf,
    max_steps: int = 2_000_000,
) -> tuple[Trajectory, list[Event]]:
    """Integrate ``sys`` forward from ``t0`` to ``t_max``.

    Parameters
    ----------
    sys : OdeSystem
    t0, y0 : initial time and state.  ``t0`` must be positive for systems with
        a singular origin (start those with :func:`series_start`).
    t_max : end of the window, ``t_max > t0``.
    rel_tol, abs_tol : local error tolerances (mixed, per component).
    events : sign-change indicators evaluated on every accepted step and
        refined by bisection on the dense output.
    breakpoints : times at which a step boundary is forced, e.g. where the
        right hand side is not smooth.

    Returns
    -------
    trajectory, events
        Recorded events are ``(index into events, t, y)`` in time order.  A stop
        event truncates the trajectory at its time.  Step size underflow and
        ``sys.blowup_bound`` end the run with ``Termination.BLOW_UP`` and keep
        the last valid state.
    """
    t0 = float(t0)
    t_max = float(t_max)
    if sys.singular_origin and not t0 > 0.0:
        raise PreconditionError("singular systems must start at t0 > 0")
    if not t_max > t0:
        raise PreconditionError("t_max must exceed t0")
    if not (0.0 < rel_tol < 1.0 and 0.0 < abs_tol < 1.0):
        raise PreconditionError("tolerances must lie in (0, 1)")

    rhs = sys.rhs
    y = [float(v) for v in np.ravel(y0)]
    dim = len(y)
    nan_state = [math.nan] * dim
    rng = range(dim)

    def fun(t, yy):
        try:
            return rhs(t, yy)
        except (OverflowError, ZeroDivisionError, FloatingPointError, ValueError):
            return nan_state

    f = fun(t0, y)
    if not all(math.isfinite(v) for v in (*y, *f)):
        raise NonFiniteState(f"non-finite initial state or derivative at t={t0!r}")

    stops = sorted(float(b) for b in breakpoints if t0 < b < t_max)
    stops.append(t_max)

    (a21,), (a31, a32), (a41, a42, a43), (a51, a52, a53, a54), (a61, a62, a63, a64, a65) = (
        tuple(float(v) for v in _A[i, :i]) for i in range(1, 6)
    )
    c2, c3, c4, c5 = (float(v) for v in _C[1:5])
    b1, _, b3, b4, b5, b6 = (float(v) for v in _B)
    e1, _, e3, e4, e5, e6, e7 = (float(v) for v in _E)

    nodes = [t0]
    states = [y]
    steps: list[float] = []
    stages: list = []
    recorded: list[Event] = []
    g_prev = [ev.indicator(t0, np.array(y)) for ev in events]
    termination = Termination.REACHED_END
    nfev = 2

    t = t0
    next_stop = 0
    n_steps = 0
    err = 1.0

    with np.errstate(all="ignore"):
        h = min(_initial_step(fun, t0, y, f, t_max - t0, rel_tol, abs_tol), max_step)
        while t < t_max:
            if n_steps >= max_steps:
                raise NumericalError(f"step budget of {max_steps} exhausted at t={t!r}")
            target = stops[next_stop]
            min_step = 10.0 * _EPS * max(abs(t), 1e-300)
            h = min(h, max_step)
            if h < min_step:
                termination = Termination.BLOW_UP
                break
            landing = t + h >= target
            if landing:
                h = target - t
            rejected = False
            while True:
                k1 = f
                k2 = fun(t + c2 * h, [y[j] + h * a21 * k1[j] for j in rng])
                k3 = fun(t + c3 * h, [y[j] + h * (a31 * k1[j] + a32 * k2[j]) for j in rng])
                k4 = fun(
                    t + c4 * h,
                    [y[j] + h * (a41 * k1[j] + a42 * k2[j] + a43 * k3[j]) for j in rng],
                )
                k5 = fun(
                    t + c5 * h,
                    [
                        y[j] + h * (a51 * k1[j] + a52 * k2[j] + a53 * k3[j] + a54 * k4[j])
                        for j in rng
                    ],
                )
                k6 = fun(
                    t + h,
                    [
                        y[j]
                        + h * (a61 * k1[j] + a62 * k2[j] + a63 * k3[j] + a64 * k4[j] + a65 * k5[j])
                        for j in rng
                    ],
                )
                y_new = [
                    y[j] + h * (b1 * k1[j] + b3 * k3[j] + b4 * k4[j] + b5 * k5[j] + b6 * k6[j])
                    for j in rng
                ]
                t_try = target if landing else t + h
                k7 = fun(t_try, y_new)
                nfev += 6
                acc = 0.0
                for j in rng:
                    e = h * (
                        e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] + e6 * k6[j] + e7 * k7[j]
                    )
                    sc = abs_tol + rel_tol * max(abs(y[j]), abs(y_new[j]))
                    acc += (e / sc) ** 2
                err = math.sqrt(acc / dim)
                finite = math.isfinite(err) and all(math.isfinite(v) for v in y_new)
                if finite and err <= 1.0:
                    break
                h *= 0.25 if not finite else max(_MIN_FACTOR, _SAFETY * err**-0.2)
                rejected = True
                landing = False
                if h < min_step:
                    break
            if h < min_step:
                termination = Termination.BLOW_UP
                break

            K = (k1, k2, k3, k4, k5, k6, k7)
            t_new = t_try
            if landing:
                next_stop += 1
            n_steps += 1

            if events:
                y_new_arr = np.array(y_new)
                found: list[Event] = []
                g_new_all = []
                seg = None
                stop_at = None
                for idx, ev in enumerate(events):
                    g_new = ev.indicator(t_new, y_new_arr)
                    g_new_all.append(g_new)
                    g_old = g_prev[idx]
                    if not _crossed(g_old, g_new, ev.direction):
                        continue
                    if max(abs(g_old), abs(g_new)) < ev.noise_floor:
                        continue
                    if g_new == 0.0:
                        t_ev, y_ev = t_new, y_new_arr.copy()
                    else:
                        if seg is None:
                            seg = _segment(t, h, y, K)
                        ind = ev.indicator
                        t_ev = _bisect(lambda tt: ind(tt, seg(tt)), t, t_new, g_old)
                        y_ev = y_new_arr.copy() if t_ev == t_new else seg(t_ev)
                    found.append(Event(idx, t_ev, y_ev))
                    if ev.action == Action.STOP and (stop_at is None or t_ev < stop_at):
                        stop_at = t_ev
                found.sort(key=lambda e: e.t)
                if stop_at is not None:
                    recorded.extend(e for e in found if e.t <= stop_at)
                    y_stop = [float(v) for v in next(e.y for e in found if e.t == stop_at)]
                    if stop_at > t:
                        steps.append(h)
                        stages.append(K)
                        nodes.append(stop_at)
                        states.append(y_stop)
                    else:
                        states[-1] = y_stop
                    termination = Termination.EVENT_STOP
                    break
                recorded.extend(found)
                g_prev = g_new_all

            steps.append(h)
            stages.append(K)
            nodes.append(t_new)
            states.append(y_new)
            t, y, f = t_new, y_new, k7

            if sys.blowup_bound is not None and abs(y[0]) > sys.blowup_bound:
                termination = Termination.BLOW_UP
                break

            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err**-0.2)
            if rejected:
                factor = min(1.0, factor)
            h = h * max(_MIN_FACTOR, factor)

    if not steps:
        raise NumericalError(f"no step could be taken from t={t0!r}")
    coeffs = np.einsum("ksd,sj->kdj", np.asarray(stages, dtype=float), _P)
    traj = Trajectory(
        nodes=np.array(nodes),
        states=np.array(states, dtype=float),
        steps=np.array(steps),
        coeffs=coeffs,
        termination=termination,
        nfev=nfev,
    )
    return traj, recorded
