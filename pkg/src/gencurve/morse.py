"""Radial solutions from the generating solution and their linearised zero counts.

The number of interior zeros of the regular solution ``z`` of the linearised
radial equation ``z'' + (n-1)/r z' + lam f_u(r, u) z = 0`` on ``(0, 1)`` is
taken as the Morse index (eigenfunctions are radial and Sturm ordering
applies).  At a turning point the scaling family provides a closed-form
kernel element ``omega``, which is checked against ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ivp
from .curve import SolutionCurve
from .errors import DomainError, NotATurningPoint, PreconditionError
from .ivp import Direction, EventSpec, OdeSystem, Trajectory
from .problems import Family, GeneratingSolution, ProblemSpec, origin_value

__all__ = [
    "MorseProfile",
    "MorseReport",
    "RadialSolution",
    "eigenfunction_candidate",
    "eigenfunction_mismatch",
    "morse_index",
    "morse_profile",
    "reconstruct",
    "turning_eigenfunction_residual",
    "turning_report",
]

DEFAULT_EPS = 1e-6
# z spans many orders of magnitude on later arcs; control it relatively
LINEAR_ABS_TOL = 1e-250
BOUNDARY_ZERO_RATIO = 1e-6
TURN_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Solution ``u`` of the Dirichlet problem on the unit ball at ``lam``.

    Obtained from the generating solution by ``t = t_b r``.  ``bvp_residual``
    is the largest residual of the radial equation on a 100-point grid,
    relative to ``max(1, max |lam r^alpha f(u)|)``.
    """

    spec: ProblemSpec
    t_b: float
    lam: float
    u0: float
    bvp_residual: float
    solution: GeneratingSolution = field(repr=False)

    def _w(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or np.any(r > 1 + 1e-12):
            raise DomainError("r must lie in [0, 1]")
        t = np.maximum(self.t_b * np.minimum(r, 1.0), 1e-300)
        return self.solution.sample(t)

    def _wb(self) -> float:
        return float(self.solution.sample(self.t_b)["w"][0])

    def profile(self, r) -> np.ndarray:
        s, wb, fam = self._w(r), self._wb(), self.spec.family
        if fam in (Family.GELFAND_EXP, Family.GELFAND_EXP_NEG):
            return s["w"] - wb
        if fam is Family.POWER_PLUS_ONE:
            return s["w"] / wb - 1.0
        return 1.0 - s["w"] / wb

    __call__ = profile

    def derivatives(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(u, u', u'')``; ``u''`` comes from differentiating the dense output."""
        s, wb, fam, b = self._w(r), self._wb(), self.spec.family, self.t_b
        w, dw, d2w = s["w"], s["dw"], s["d2w"]
        if fam in (Family.GELFAND_EXP, Family.GELFAND_EXP_NEG):
            return w - wb, b * dw, b * b * d2w
        sign = 1.0 if fam is Family.POWER_PLUS_ONE else -1.0
        u = w / wb - 1.0 if sign > 0 else 1.0 - w / wb
        return u, sign * b * dw / wb, sign * b * b * d2w / wb

    def nonlinearity(self, r, u) -> np.ndarray:
        """``r^alpha f(u)``."""
        fam, p, al = self.spec.family, self.spec.p, self.spec.alpha
        ra = np.asarray(r, dtype=float) ** al
        if fam is Family.GELFAND_EXP:
            return ra * np.exp(u)
        if fam is Family.GELFAND_EXP_NEG:
            return ra * np.exp(-u)
        if fam is Family.POWER_PLUS_ONE:
            return ra * (1.0 + u) ** p
        return ra / (1.0 - u) ** p

    def potential(self, r) -> np.ndarray:
        """``lam f_u(r, u(r))`` along the solution."""
        t = np.maximum(self.t_b * np.atleast_1d(np.asarray(r, dtype=float)), 1e-300)
        return self.t_b**2 * self.solution.linear_coefficient(t)


def _residual(sol: RadialSolution, r) -> np.ndarray:
    u, du, d2u = sol.derivatives(r)
    return d2u + (sol.spec.n - 1.0) / r * du + sol.lam * sol.nonlinearity(r, u)


def reconstruct(spec: ProblemSpec, solution: GeneratingSolution, t_b: float) -> RadialSolution:
    """Radial Dirichlet solution generated at parameter ``t_b``."""
    if not (0.0 < t_b <= solution.t_end):
        raise DomainError(f"t_b={t_b!r} outside (0, {solution.t_end!r}]")
    s = solution.sample(t_b)
    lam, u0 = float(s["lam"][0]), float(s["u0"][0])
    sol = RadialSolution(spec, float(t_b), lam, u0, math.nan, solution)
    grid = np.linspace(0.01, 1.0, 100)
    # grid points below t_start use the series, where d2w is not available
    grid = grid[t_b * grid >= spec.t_start]
    if grid.size:
        res = _residual(sol, grid)
        scale = max(1.0, float(np.max(np.abs(lam * sol.nonlinearity(grid, sol.profile(grid))))))
        resid = float(np.max(np.abs(res))) / scale
    else:
        resid = 0.0
    object.__setattr__(sol, "bvp_residual", resid)
    return sol


@dataclass(frozen=True)
class MorseReport:
    t_b: float
    u0: float
    lam: float
    zero_count: int
    boundary_zero: bool
    min_zero_slope: float | None
    eigenfunction_residual: float | None = None
    eigenfunction_mismatch: float | None = None
    lambda_second_derivative: float | None = None


def _potential_function(sol: RadialSolution):
    """Fast scalar ``r -> lam f_u(r, u(r))`` for the stepping loop."""
    gen, spec, b = sol.solution, sol.spec, sol.t_b
    tr = gen.trajectory
    t_lo = spec.t_start
    exp, log = math.exp, math.log
    fam, p, al = spec.family, spec.p, spec.alpha
    b2 = b * b

    def series_coeff(t):
        return float(gen.linear_coefficient(t)[0])

    if gen.guided:
        ls = gen.lambda_star
        s_hi = tr.t_end
        if fam is Family.GELFAND_EXP:
            def pot(r):
                t = b * r
                if t < t_lo:
                    return b2 * series_coeff(t)
                return ls * exp(tr(min(log(t), s_hi))[0]) / (r * r)
        else:
            def pot(r):
                t = b * r
                if t < t_lo:
                    return b2 * series_coeff(t)
                d = tr(min(log(t), s_hi))[0]
                return p * ls * exp(-(p + 1.0) * math.log1p(d)) / (r * r)
        return pot

    t_hi = tr.t_end
    w_origin = origin_value(spec)

    def coeff_raw(t, w):
        if fam is Family.GELFAND_EXP:
            return t**al * exp(w)
        if fam is Family.GELFAND_EXP_NEG:
            return -(t**al) * exp(-w)
        if fam is Family.POWER_PLUS_ONE:
            return p * t**al * abs(w) ** (p - 1.0)
        return p * t**al * w ** (-p - 1.0)

    def pot(r):
        t = b * r
        if t < t_lo:
            return b2 * series_coeff(t)
        return b2 * coeff_raw(t, w_origin + tr(min(t, t_hi))[0])

    return pot


def _linearised(sol: RadialSolution, eps: float | None, rel_tol: float, abs_tol: float):
    spec = sol.spec
    if eps is None:
        # keep t_b * eps inside the series region of the generating solution
        eps = min(DEFAULT_EPS, spec.t_start / sol.t_b)
    pot = _potential_function(sol)
    nm1 = spec.n - 1.0

    def rhs(r, y):
        return (y[1], -nm1 / r * y[1] - pot(r) * y[0])

    sys = OdeSystem(rhs, 2, singular_origin=True, name="linearised")
    # V(r) ~ V0 r^alpha near the origin
    V0 = float(sol.potential(eps)[0]) / eps**spec.alpha
    y0 = ivp.series_start(1.0, V0, spec.n, spec.alpha, eps)
    zero = EventSpec(lambda r, y: y[0], Direction.ANY, name="zero")
    return ivp.integrate(sys, eps, y0, 1.0, rel_tol, abs_tol, (zero,))


def morse_index(
    sol: RadialSolution,
    eps: float | None = None,
    rel_tol: float = ivp.DEFAULT_REL_TOL,
    abs_tol: float = LINEAR_ABS_TOL,
) -> MorseReport:
    """Count interior sign changes of the regular linearised solution on ``(eps, 1)``.

    A zero at ``r = 1`` (singular solution, ``|z(1)| < 1e-6 max|z|``) is
    reported through ``boundary_zero`` and not counted.
    """
    traj, events = _linearised(sol, eps, rel_tol, abs_tol)
    z_max = float(np.max(np.abs(traj.states[:, 0])))
    boundary = abs(traj.states[-1, 0]) < BOUNDARY_ZERO_RATIO * z_max
    zeros = [e for e in events if not (boundary and e.t > 1.0 - BOUNDARY_ZERO_RATIO)]
    dz_max = float(np.max(np.abs(traj.states[:, 1])))
    slope = min((abs(e.y[1]) / dz_max for e in zeros), default=None)
    return MorseReport(
        t_b=sol.t_b,
        u0=sol.u0,
        lam=sol.lam,
        zero_count=len(zeros),
        boundary_zero=bool(boundary),
        min_zero_slope=None if slope is None else float(slope),
    )


def eigenfunction_candidate(sol: RadialSolution, r) -> np.ndarray:
    """Kernel element of the linearisation generated by the scaling symmetry.

    Gelfand: ``r u' + (2 + alpha)``; ``e^{-u}``: ``r u' - (2 + alpha)``;
    power: ``r u' + (alpha+2)/(p-1) (1 + u)``; MEMS:
    ``r u' + (alpha+2)/(p+1) (1 - u)``.  It vanishes at ``r = 1`` exactly
    when ``lam'(t_b) = 0``.
    """
    spec = sol.spec
    r = np.atleast_1d(np.asarray(r, dtype=float))
    u, du, _ = sol.derivatives(r)
    a2, p = spec.alpha + 2.0, spec.p
    fam = spec.family
    if fam is Family.GELFAND_EXP:
        return r * du + a2
    if fam is Family.GELFAND_EXP_NEG:
        return r * du - a2
    if fam is Family.POWER_PLUS_ONE:
        return r * du + a2 / (p - 1.0) * (1.0 + u)
    return r * du + a2 / (p + 1.0) * (1.0 - u)


def _check_turning(sol: RadialSolution) -> None:
    gen = sol.solution
    tb = sol.t_b
    near = np.array([tb * math.exp(-0.1), tb, min(tb * math.exp(0.1), gen.t_end)])
    ind = np.abs(gen.sample(near)["indicator"])
    if not ind[1] <= TURN_TOLERANCE * max(ind[0], ind[2]):
        raise NotATurningPoint(f"lam'(t) does not vanish at t_b={tb!r}")


def _candidate_constants(spec: ProblemSpec) -> tuple[float, float]:
    """``(c0, c1)`` with ``omega = r u' + c0 + c1 u``."""
    a2, p, fam = spec.alpha + 2.0, spec.p, spec.family
    if fam is Family.GELFAND_EXP:
        return a2, 0.0
    if fam is Family.GELFAND_EXP_NEG:
        return -a2, 0.0
    if fam is Family.POWER_PLUS_ONE:
        return a2 / (p - 1.0), a2 / (p - 1.0)
    return a2 / (p + 1.0), -a2 / (p + 1.0)


def turning_eigenfunction_residual(sol: RadialSolution) -> float:
    """Linearised-equation residual of the closed-form kernel element plus
    ``|omega(1)| / max |omega|``.

    The residual is taken on a 100-point grid relative to the size of its
    largest term.  The second derivative of ``u`` comes from the dense
    output, the third from the differentiated radial equation.
    """
    _check_turning(sol)
    spec = sol.spec
    grid = np.linspace(0.01, 1.0, 100)
    grid = grid[sol.t_b * grid >= spec.t_start]
    if grid.size == 0:
        raise PreconditionError("turning point too close to the origin for the residual grid")
    c0, c1 = _candidate_constants(spec)
    nm1, al = spec.n - 1.0, spec.alpha
    u, du, d2u = sol.derivatives(grid)
    V = sol.potential(grid)
    g = sol.lam * sol.nonlinearity(grid, u)
    d3u = -nm1 * (d2u / grid - du / grid**2) - al * g / grid - V * du
    om = grid * du + c0 + c1 * u
    d_om = (1.0 + c1) * du + grid * d2u
    d2_om = (2.0 + c1) * d2u + grid * d3u
    terms = np.abs(d2_om) + np.abs(nm1 / grid * d_om) + np.abs(V * om)
    lin = np.max(np.abs(d2_om + nm1 / grid * d_om + V * om)) / np.max(terms)
    full = eigenfunction_candidate(sol, np.linspace(0.0, 1.0, 201))
    end = abs(float(eigenfunction_candidate(sol, 1.0)[0]))
    return float(lin + end / np.max(np.abs(full)))


def eigenfunction_mismatch(
    sol: RadialSolution, rel_tol: float = 1e-11, abs_tol: float = LINEAR_ABS_TOL
) -> float:
    """Max-norm distance between the integrated linearised solution and the
    closed-form kernel element.

    The kernel element is scaled to unit max-norm and the integrated solution
    is fitted onto it by least squares, so no single point fixes the scale.
    """
    _check_turning(sol)
    traj, _ = _linearised(sol, None, rel_tol, abs_tol)
    grid = np.linspace(traj.t_start, 1.0, 201)
    z = traj.evaluate(grid)[:, 0]
    om = eigenfunction_candidate(sol, grid)
    om = om / np.max(np.abs(om))
    z = z * (np.dot(z, om) / np.dot(z, z))
    return float(np.max(np.abs(z - om)))


@dataclass(frozen=True)
class MorseProfile:
    """Zero counts at probes along the curve, grouped by arc between turns."""

    reports: tuple[MorseReport, ...]
    arc_indices: tuple[tuple[int, ...], ...]
    consistent: bool

    @property
    def ladder(self) -> list[int]:
        """Index of each arc (first probe), ordered by increasing ``u(0)``."""
        return [arc[0] for arc in self.arc_indices]


def morse_profile(
    spec: ProblemSpec, curve: SolutionCurve, probes_per_arc: int = 3
) -> MorseProfile:
    """Morse index at interior probes of every arc of ``curve``.

    ``consistent`` is true when the index is constant on each arc and grows by
    exactly one across each turn.
    """
    if probes_per_arc < 1:
        raise PreconditionError("probes_per_arc must be >= 1")
    gen = curve.solution
    if gen is None:
        raise PreconditionError("curve carries no generating solution")
    edges = [spec.t_start] + [tp.t_n for tp in curve.turns] + [curve.t_end]
    fractions = (np.arange(probes_per_arc) + 1.0) / (probes_per_arc + 1.0)
    reports, arcs = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        counts = []
        for f in fractions:
            t_b = float(lo * (hi / lo) ** f)
            rep = morse_index(reconstruct(spec, gen, t_b))
            reports.append(rep)
            counts.append(rep.zero_count)
        arcs.append(tuple(counts))
    constant = all(len(set(a)) == 1 for a in arcs)
    steps = all(b[0] - a[0] == 1 for a, b in zip(arcs[:-1], arcs[1:]))
    return MorseProfile(tuple(reports), tuple(arcs), bool(constant and steps))


def turning_report(curve: SolutionCurve, index: int) -> MorseReport:
    """Morse report at the ``index``-th turning point of ``curve``, including the
    kernel-element checks and the finite-difference ``lam''``."""
    if curve.solution is None:
        raise PreconditionError("curve carries no generating solution")
    tp = curve.turns[index]
    sol = reconstruct(curve.spec, curve.solution, tp.t_n)
    rep = morse_index(sol)
    return replace(
        rep,
        eigenfunction_residual=turning_eigenfunction_residual(sol),
        eigenfunction_mismatch=eigenfunction_mismatch(sol),
        lambda_second_derivative=tp.second_derivative,
    )
