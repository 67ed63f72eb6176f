"""Self-similar radial Dirichlet families and their generating solutions.

Each family ``u'' + (n-1)/r u' + lam * f(r, u) = 0, u'(0) = u(1) = 0`` is
swept out by scalings of a single generating solution ``w(t)`` of an initial
value problem.  This module holds the right-hand sides, the maps from
``(t, w)`` to curve coordinates ``(lam, u(0))``, the explicit guiding
solutions and the Euler-equation regime criteria.

For the two families with a guiding solution ``w0`` (Gelfand with
``n >= 3`` and MEMS) the generating solution is integrated in *guided*
variables: the deviation from ``w0`` as a function of ``s = ln t``.  The
deviation obeys an autonomous ODE and decays geometrically, so it keeps full
relative precision long after ``w - w0`` has dropped below the rounding level
of ``w`` itself.  Late turning points depend on exactly that quantity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import ivp
from .errors import DomainError, PreconditionError, UnsupportedFamily
from .ivp import Action, Direction, EventSpec, OdeSystem, Termination, Trajectory

__all__ = [
    "EulerRoots",
    "Family",
    "GeneratingSolution",
    "GuidingSolution",
    "ProblemSpec",
    "Regime",
    "classify_regime",
    "curve_point",
    "euler_roots",
    "generating_system",
    "guided_system",
    "guiding_solution",
    "origin_value",
    "lambda_star",
    "solve_generating",
    "turn_indicator",
]

BLOWUP_BOUND = 700.0
# Guided deviations decay like exp(-c s); an absolute floor would stop
# controlling them long before the turns of interest.
GUIDED_ABS_TOL = 1e-250
MEMS_U0_LIMIT = 1.0 - 1e-8
# guided runs also integrate w directly on [t_start, NEAR_ORIGIN_END], where
# w itself is small and w0 + deviation would lose digits
NEAR_ORIGIN_END = 1.0


class Family(str, enum.Enum):
    GELFAND_EXP = "gelfand-exp"
    GELFAND_EXP_NEG = "gelfand-exp-neg"
    POWER_PLUS_ONE = "power-plus-one"
    MEMS = "mems"
    HENON = "henon"


class Regime(str, enum.Enum):
    INFINITELY_MANY_TURNS = "InfinitelyManyTurns"
    AT_MOST_TWO_TURNS = "AtMostTwoTurns"


@dataclass(frozen=True)
class ProblemSpec:
    """Equation family, parameters and numerical knobs."""

    family: Family
    n: float = 3.0
    alpha: float = 0.0
    p: float = 2.0
    t_max: float = 1e6
    rel_tol: float = ivp.DEFAULT_REL_TOL
    abs_tol: float = ivp.DEFAULT_ABS_TOL
    t_start: float = ivp.DEFAULT_T_START

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.n >= 1:
            raise PreconditionError(f"dimension n must be >= 1, got {self.n!r}")
        if not self.alpha >= 0:
            raise PreconditionError(f"alpha must be >= 0, got {self.alpha!r}")
        if self.family in (Family.MEMS, Family.POWER_PLUS_ONE, Family.HENON) and not self.p > 1:
            raise PreconditionError(f"p must exceed 1 for {self.family.value}, got {self.p!r}")
        if self.family is Family.HENON and self.n != 1:
            raise PreconditionError("the Henon problem is one-dimensional (n = 1)")
        if not (self.t_max > self.t_start > 0):
            raise PreconditionError("need t_max > t_start > 0")
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise PreconditionError("tolerances must lie in (0, 1)")

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class GuidingSolution:
    """Explicit singular solution ``w0``.

    ``log-linear``: ``w0 = A - beta ln t``; ``power-law``: ``w0 = c0 t^beta``.
    """

    form: str
    beta: float
    A: float | None = None
    c0: float | None = None

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "log-linear":
            return self.A - self.beta * np.log(t)
        return self.c0 * t**self.beta

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "log-linear":
            return -self.beta / t
        return self.c0 * self.beta * t ** (self.beta - 1.0)

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "log-linear":
            return self.beta / t**2
        return self.c0 * self.beta * (self.beta - 1.0) * t ** (self.beta - 2.0)


@dataclass(frozen=True)
class EulerRoots:
    root_plus: complex
    root_minus: complex
    discriminant: float
    oscillatory: bool


def _require_generating(spec: ProblemSpec) -> None:
    if spec.family is Family.HENON:
        raise UnsupportedFamily("the Henon equation is handled by gencurve.henon")


def _has_guide(spec: ProblemSpec) -> bool:
    if spec.family is Family.GELFAND_EXP:
        return spec.n > 2
    return spec.family is Family.MEMS and spec.n >= 2


def guiding_solution(spec: ProblemSpec) -> GuidingSolution:
    if spec.family is Family.GELFAND_EXP:
        if not spec.n > 2:
            raise UnsupportedFamily("the Gelfand guiding solution needs n >= 3")
        beta = 2.0 + spec.alpha
        return GuidingSolution("log-linear", beta=beta, A=math.log(beta * (spec.n - 2.0)))
    if spec.family is Family.MEMS:
        if not spec.n >= 2:
            raise UnsupportedFamily("the MEMS guiding solution is used for n >= 2")
        beta = (spec.alpha + 2.0) / (spec.p + 1.0)
        c0 = (beta * (beta + spec.n - 2.0)) ** (-1.0 / (spec.p + 1.0))
        return GuidingSolution("power-law", beta=beta, c0=c0)
    raise UnsupportedFamily(f"no guiding solution for {spec.family.value}")


def lambda_star(spec: ProblemSpec) -> float:
    """Limit of ``lam(t)`` along the guiding solution."""
    g = guiding_solution(spec)
    if spec.family is Family.GELFAND_EXP:
        return g.beta * (spec.n - 2.0)
    return g.beta * (g.beta + spec.n - 2.0)


def euler_roots(spec: ProblemSpec) -> EulerRoots:
    """Characteristic exponents of the linearisation about the guiding solution."""
    g = guiding_solution(spec)
    n = spec.n
    if spec.family is Family.GELFAND_EXP:
        disc = (n - 2.0) * (n - 10.0 - 4.0 * spec.alpha)
    else:
        disc = (n - 2.0) ** 2 - 4.0 * spec.p * g.beta * (g.beta + n - 2.0)
    sq = complex(0.0, math.sqrt(-disc)) if disc < 0 else complex(math.sqrt(disc), 0.0)
    return EulerRoots(
        root_plus=(-n + 2.0 + sq) / 2.0,
        root_minus=(-n + 2.0 - sq) / 2.0,
        discriminant=disc,
        oscillatory=disc < 0,
    )


def classify_regime(spec: ProblemSpec) -> Regime:
    if spec.family is Family.GELFAND_EXP and not spec.n >= 3:
        raise UnsupportedFamily("regime classification for Gelfand needs n >= 3")
    if euler_roots(spec).oscillatory:
        return Regime.INFINITELY_MANY_TURNS
    return Regime.AT_MOST_TWO_TURNS


def regime_threshold(spec: ProblemSpec) -> float:
    """Dimension below which the curve makes infinitely many turns."""
    if spec.family is Family.GELFAND_EXP:
        return 10.0 + 4.0 * spec.alpha
    if spec.family is Family.MEMS:
        p = spec.p
        return 2.0 + 2.0 * (spec.alpha + 2.0) / (p + 1.0) * (p + math.sqrt(p * p + p))
    raise UnsupportedFamily(f"no regime threshold for {spec.family.value}")


# -- generating IVP in the original variable t -----------------------------------


def _forcing(spec: ProblemSpec):
    """``F`` in ``w'' + (n-1)/t w' + t^alpha F(w) = 0`` and the origin value ``w(0)``."""
    fam, p = spec.family, spec.p
    if fam is Family.GELFAND_EXP:
        return math.exp, 0.0
    if fam is Family.GELFAND_EXP_NEG:
        return (lambda w: math.exp(-w)), 0.0
    if fam is Family.POWER_PLUS_ONE:
        # odd extension keeps trial stages past the root finite
        return (lambda w: math.copysign(abs(w) ** p, w)), 1.0
    if fam is Family.MEMS:
        return (lambda w: -(w ** (-p))), 1.0
    raise UnsupportedFamily(f"{fam.value} has no generating IVP")


def generating_system(spec: ProblemSpec) -> tuple[OdeSystem, float]:
    """Generating IVP as a first order system in ``t`` plus the origin value ``w(0)``."""
    _require_generating(spec)
    F, w_origin = _forcing(spec)
    nm1, alpha = spec.n - 1.0, spec.alpha

    if alpha == 0.0:

        def rhs(t, y):
            return (y[1], -nm1 / t * y[1] - F(y[0]))

    else:

        def rhs(t, y):
            return (y[1], -nm1 / t * y[1] - t**alpha * F(y[0]))

    bound = BLOWUP_BOUND if spec.family is Family.GELFAND_EXP_NEG else None
    sys = OdeSystem(rhs, 2, singular_origin=True, blowup_bound=bound, name=spec.family.value)
    return sys, w_origin


def origin_value(spec: ProblemSpec) -> float:
    """``w(0)`` of the generating solution."""
    _require_generating(spec)
    return _forcing(spec)[1]


def _offset_system(spec: ProblemSpec) -> OdeSystem:
    """Generating IVP for ``(w - w(0), w')``.

    Carrying the offset keeps full relative precision in ``u(0)`` near the
    origin when ``w(0) = 1``.
    """
    sys, w_origin = generating_system(spec)
    if w_origin == 0.0:
        return sys
    F = _forcing(spec)[0]
    nm1, alpha = spec.n - 1.0, spec.alpha

    def rhs(t, y):
        return (y[1], -nm1 / t * y[1] - t**alpha * F(w_origin + y[0]))

    return OdeSystem(rhs, 2, singular_origin=True, blowup_bound=sys.blowup_bound, name=sys.name)


def _offset_start(spec: ProblemSpec) -> np.ndarray:
    F, w_origin = _forcing(spec)
    return ivp.series_start(0.0, F(w_origin), spec.n, spec.alpha, spec.t_start)


def _u0_from_offset(spec: ProblemSpec, v):
    fam = spec.family
    if fam is Family.POWER_PLUS_ONE:
        return -v / (1.0 + v)
    if fam is Family.MEMS:
        return v / (1.0 + v)
    return -v


def _lambda_and_indicator(spec: ProblemSpec, t, w, dw):
    """Vectorised ``lam`` and turn indicator from ``(w, w')``."""
    fam, a2, p = spec.family, spec.alpha + 2.0, spec.p
    with np.errstate(all="ignore"):
        if fam is Family.GELFAND_EXP:
            return t**a2 * np.exp(w), a2 + t * dw
        if fam is Family.GELFAND_EXP_NEG:
            return t**a2 * np.exp(-w), a2 - t * dw
        if fam is Family.POWER_PLUS_ONE:
            return t**a2 * np.abs(w) ** (p - 1.0), a2 * w + (p - 1.0) * t * dw
        return t**a2 / w ** (p + 1.0), a2 * w - (p + 1.0) * t * dw


def origin_series(spec: ProblemSpec, t):
    """Two-term expansion of ``(w, w')`` near ``t = 0`` (vectorised in ``t``)."""
    F, w_origin = _forcing(spec)
    a2 = spec.alpha + 2.0
    c = -F(w_origin) / (a2 * (spec.alpha + spec.n))
    t = np.asarray(t, dtype=float)
    return w_origin + c * t**a2, c * a2 * t ** (a2 - 1.0)


def curve_point(spec: ProblemSpec, t: float, w: float) -> tuple[float, float]:
    """``(lam, u(0))`` for the BVP solution generated at parameter ``t``."""
    fam, a2, p = spec.family, spec.alpha + 2.0, spec.p
    if fam is Family.GELFAND_EXP:
        return t**a2 * math.exp(w), -w
    if fam is Family.GELFAND_EXP_NEG:
        return t**a2 * math.exp(-w), -w
    if not w > 0:
        raise DomainError(f"w must be positive for {fam.value}, got {w!r}")
    if fam is Family.POWER_PLUS_ONE:
        return t**a2 * w ** (p - 1.0), 1.0 / w - 1.0
    if fam is Family.MEMS:
        return t**a2 / w ** (p + 1.0), 1.0 - 1.0 / w
    raise UnsupportedFamily(f"{fam.value} has no curve parameterisation")


def turn_indicator(spec: ProblemSpec, t: float, w: float, wprime: float) -> float:
    """Quantity with the sign of ``d lam / dt``."""
    fam, a2, p = spec.family, spec.alpha + 2.0, spec.p
    if fam is Family.GELFAND_EXP:
        return a2 + t * wprime
    if fam is Family.GELFAND_EXP_NEG:
        return a2 - t * wprime
    if fam is Family.POWER_PLUS_ONE:
        return a2 * w + (p - 1.0) * t * wprime
    if fam is Family.MEMS:
        return a2 * w - (p + 1.0) * t * wprime
    raise UnsupportedFamily(f"{fam.value} has no curve parameterisation")


# -- guided formulation in s = ln t ----------------------------------------------


def guided_system(spec: ProblemSpec) -> OdeSystem:
    """Autonomous ODE for the deviation from the guiding solution in ``s = ln t``.

    Gelfand: ``w = w0 + d``, ``d'' + (n-2) d' + lam* expm1(d) = 0``.
    MEMS: ``w = w0 (1 + d)``,
    ``d'' + (2 beta + n - 2) d' + lam* (d - expm1(-p log1p(d))) = 0``.
    """
    g = guiding_solution(spec)
    ls = lambda_star(spec)
    if spec.family is Family.GELFAND_EXP:
        damping = spec.n - 2.0
        expm1 = math.expm1

        def rhs(s, y):
            return (y[1], -damping * y[1] - ls * expm1(y[0]))

    else:
        damping = 2.0 * g.beta + spec.n - 2.0
        p = spec.p
        expm1, log1p = math.expm1, math.log1p

        def rhs(s, y):
            d = y[0]
            return (y[1], -damping * y[1] - ls * (d - expm1(-p * log1p(d))))

    return OdeSystem(rhs, 2, name=f"{spec.family.value}-guided")


def _to_guided(spec: ProblemSpec, g: GuidingSolution, t: float, w: float, dw: float):
    if spec.family is Family.GELFAND_EXP:
        return np.array([w - float(g.value(t)), t * dw + g.beta])
    w0 = float(g.value(t))
    d = w / w0 - 1.0
    return np.array([d, t * dw / w0 - g.beta * (1.0 + d)])


# -- generating solution object --------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneratingSolution:
    """Integrated generating solution, evaluable in the original variable ``t``.

    When ``guided`` is true the trajectory lives in ``s = ln t`` and its state
    is the deviation ``(d, d_s)`` from the guiding solution; otherwise it holds
    ``(w - w(0), w')`` in ``t``, as does ``near_origin``.  Below ``t_start`` the origin series is used.
    """

    spec: ProblemSpec
    trajectory: Trajectory
    guided: bool
    events: tuple = field(default=(), repr=False)
    t_limit: float | None = None
    near_origin: Trajectory | None = field(default=None, repr=False)

    @property
    def guide(self) -> GuidingSolution | None:
        return guiding_solution(self.spec) if _has_guide(self.spec) else None

    @property
    def lambda_star(self) -> float | None:
        return lambda_star(self.spec) if _has_guide(self.spec) else None

    @property
    def t_start(self) -> float:
        return self.spec.t_start

    @property
    def t_end(self) -> float:
        if self.t_limit is not None and self.termination is Termination.REACHED_END:
            return self.t_limit
        tr = self.trajectory.t_end
        return float(math.exp(tr)) if self.guided else tr

    @property
    def termination(self) -> Termination:
        return self.trajectory.termination

    def to_time(self, t):
        """Trajectory variable for ``t`` (``ln t`` when guided)."""
        return np.log(t) if self.guided else np.asarray(t, dtype=float)

    def _eval_raw(self, t):
        """Trajectory state at ``t``, clipped into the integrated window."""
        tv = self.to_time(t)
        lo, hi = self.trajectory.t_start, self.trajectory.t_end
        tv = np.clip(tv, lo, hi)
        return self.trajectory.evaluate(tv)

    def sample(self, t) -> dict[str, np.ndarray]:
        """Vectorised evaluation of ``w, w', w'', lam, u0, indicator`` and, when a
        guiding solution exists, ``deviation`` and ``lambda_offset = lam - lam*``."""
        spec = self.spec
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= 0) or np.any(t > self.t_end * (1 + 1e-14)):
            raise DomainError("sample points must lie in (0, t_end]")
        t = np.minimum(t, self.t_end)
        a2, p = spec.alpha + 2.0, spec.p
        early = t < self.t_start
        out: dict[str, np.ndarray] = {"t": t}
        g = self.guide
        with np.errstate(all="ignore"):
            return self._sample(t, out, early, g, a2, p)

    def _sample(self, t, out, early, g, a2, p):
        spec = self.spec
        w_origin = origin_value(spec)
        if self.guided:
            Y = self._eval_raw(t)
            dY = self.trajectory_derivative(t)
            d, ds = Y[:, 0], Y[:, 1]
            dss = dY[:, 1]
            if early.any():
                ws, dws = origin_series(spec, t[early])
                conv = np.array([_to_guided(spec, g, tt, a, b) for tt, a, b in zip(t[early], ws, dws)])
                d, ds = d.copy(), ds.copy()
                d[early], ds[early] = conv[:, 0], conv[:, 1]
                dss = dss.copy()
                dss[early] = np.nan
            ls = self.lambda_star
            w0 = g.value(t)
            if spec.family is Family.GELFAND_EXP:
                w = w0 + d
                dw = (ds - g.beta) / t
                d2w = (dss - ds + g.beta) / t**2
                lam_off = ls * np.expm1(d)
                lam = ls * np.exp(d)
                ind = ds
            else:
                v = 1.0 + d
                w = w0 * v
                dw = w0 / t * (g.beta * v + ds)
                b = g.beta
                d2w = w0 / t**2 * (dss + (2 * b - 1) * ds + b * (b - 1) * v)
                expo = -(p + 1.0) * np.log1p(d)
                lam_off = ls * np.expm1(expo)
                lam = ls * np.exp(expo)
                ind = -(p + 1.0) * w0 * ds
            out.update(deviation=d, deviation_s=ds, lambda_offset=lam_off)
            u0 = -w if spec.family is Family.GELFAND_EXP else 1.0 - 1.0 / w
            if early.any():
                u0 = u0.copy()
                u0[early] = _u0_from_offset(spec, origin_series(spec, t[early])[0] - w_origin)
            near = self.near_origin
            if near is not None:
                # w = w0 + d cancels while |w| << |w0|; use the direct solution there
                m = (t >= self.t_start) & (t <= near.t_end)
                if m.any():
                    Yn = near.evaluate(t[m])
                    w, dw, d2w, u0 = w.copy(), dw.copy(), d2w.copy(), u0.copy()
                    lam, lam_off, ind = lam.copy(), lam_off.copy(), ind.copy()
                    w[m], dw[m] = w_origin + Yn[:, 0], Yn[:, 1]
                    u0[m] = _u0_from_offset(spec, Yn[:, 0])
                    d2w[m] = near.derivative(t[m])[:, 1]
                    # keep every sampled quantity on the same state
                    lam[m], ind[m] = _lambda_and_indicator(spec, t[m], w[m], dw[m])
                    lam_off[m] = lam[m] - ls
                    out["lambda_offset"] = lam_off
        else:
            Y = self._eval_raw(t)
            v, dw = Y[:, 0].copy(), Y[:, 1].copy()
            d2w = self.trajectory_derivative(t)[:, 1]
            if early.any():
                ws, dws = origin_series(spec, t[early])
                v[early], dw[early] = ws - w_origin, dws
                d2w = d2w.copy()
                d2w[early] = np.nan
            w = w_origin + v
            u0 = _u0_from_offset(spec, v)
            lam, ind = _lambda_and_indicator(spec, t, w, dw)
            if g is not None:
                out.update(deviation=w - g.value(t), lambda_offset=lam - self.lambda_star)
        out.update(w=w, dw=dw, d2w=d2w, lam=lam, u0=u0, indicator=ind)
        return out

    def trajectory_derivative(self, t) -> np.ndarray:
        """Derivative of the dense output with respect to the trajectory variable."""
        tr = self.trajectory
        return tr.derivative(np.clip(self.to_time(t), tr.t_start, tr.t_end))

    def w(self, t) -> np.ndarray:
        return self.sample(t)["w"]

    def linear_coefficient(self, t) -> np.ndarray:
        """``c(t)`` in the linearised generating equation ``y'' + (n-1)/t y' + c y = 0``."""
        spec = self.spec
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = self.sample(t)
        fam, p, al = spec.family, spec.p, spec.alpha
        if self.guided:
            ls = self.lambda_star
            d = s["deviation"]
            if fam is Family.GELFAND_EXP:
                return ls * np.exp(d) / t**2
            return p * ls * np.exp(-(p + 1.0) * np.log1p(d)) / t**2
        w = s["w"]
        if fam is Family.GELFAND_EXP:
            return t**al * np.exp(w)
        if fam is Family.GELFAND_EXP_NEG:
            return -(t**al) * np.exp(-w)
        if fam is Family.POWER_PLUS_ONE:
            return p * t**al * np.abs(w) ** (p - 1.0)
        return p * t**al * w ** (-p - 1.0)

    def lambda_derivative(self, t) -> np.ndarray:
        """``d lam / dt`` from the state (no differencing)."""
        s = self.sample(t)
        spec, t = self.spec, s["t"]
        a2, p = spec.alpha + 2.0, spec.p
        fam = spec.family
        if fam is Family.GELFAND_EXP:
            return s["lam"] / t * s["indicator"]
        if fam is Family.GELFAND_EXP_NEG:
            return s["lam"] / t * s["indicator"]
        if fam is Family.POWER_PLUS_ONE:
            return s["lam"] / (t * s["w"]) * s["indicator"]
        return s["lam"] / (t * s["w"]) * s["indicator"]


def _raw_abs_tol(spec: ProblemSpec) -> float:
    # the offset w - w(0) starts at zero and lies far below any fixed absolute
    # tolerance early on, where u(0) would lose all its digits
    return min(spec.abs_tol, GUIDED_ABS_TOL)


def solve_generating(
    spec: ProblemSpec,
    t_max: float | None = None,
    *,
    guided: bool | None = None,
    events: tuple[EventSpec, ...] = (),
    rel_tol: float | None = None,
) -> GeneratingSolution:
    """Integrate the generating solution of ``spec`` up to ``t_max``.

    The window also ends at the first root of ``w`` (power family), at blow-up
    (``e^{-u}`` family) and once ``u(0)`` reaches ``1 - 1e-8`` (MEMS).
    ``events`` are expressed in trajectory variables (see
    :class:`GeneratingSolution`) and are returned on the result.
    """
    _require_generating(spec)
    t_max = spec.t_max if t_max is None else float(t_max)
    rtol = spec.rel_tol if rel_tol is None else rel_tol
    if guided is None:
        guided = _has_guide(spec)
    if guided and not _has_guide(spec):
        raise UnsupportedFamily(f"no guiding solution for {spec.family.value} with n={spec.n}")

    sys_t, w_origin = _offset_system(spec), origin_value(spec)
    F = _forcing(spec)[0]
    y0 = ivp.series_start(w_origin, F(w_origin), spec.n, spec.alpha, spec.t_start)
    stops: list[EventSpec] = []
    if guided:
        g = guiding_solution(spec)
        sys = guided_system(spec)
        y0 = _to_guided(spec, g, spec.t_start, y0[0], y0[1])
        t0, t1 = math.log(spec.t_start), math.log(t_max)
        atol = GUIDED_ABS_TOL
        if spec.family is Family.MEMS:
            limit = 1.0 / (1.0 - MEMS_U0_LIMIT)
            c0, beta = g.c0, g.beta
            stops.append(
                EventSpec(
                    lambda s, y: c0 * math.exp(beta * s) * (1.0 + y[0]) - limit,
                    Direction.UP,
                    Action.STOP,
                    name="u0-limit",
                )
            )
    else:
        sys = sys_t
        y0 = _offset_start(spec)
        t0, t1 = spec.t_start, t_max
        atol = _raw_abs_tol(spec)
        if spec.family is Family.POWER_PLUS_ONE:
            stops.append(
                EventSpec(lambda t, y: y[0] + 1.0, Direction.DOWN, Action.STOP, name="root")
            )
        elif spec.family is Family.MEMS:
            limit = 1.0 / (1.0 - MEMS_U0_LIMIT) - 1.0
            stops.append(
                EventSpec(lambda t, y: y[0] - limit, Direction.UP, Action.STOP, name="u0-limit")
            )
    all_events = tuple(events) + tuple(stops)
    traj, recorded = ivp.integrate(sys, t0, y0, t1, rtol, atol, all_events)
    user = tuple(e for e in recorded if e.index < len(events))
    near = None
    if guided:
        t_switch = min(NEAR_ORIGIN_END, math.exp(traj.t_end))
        if t_switch > spec.t_start:
            near, _ = ivp.integrate(
                sys_t, spec.t_start, _offset_start(spec), t_switch, rtol,
                _raw_abs_tol(spec),
            )
    return GeneratingSolution(spec, traj, guided, user, t_max, near)
