"""Shooting for positive solutions of ``u'' + lam |x|^alpha u^p = 0`` on ``(-1, 1)``.

A shot starts from an interior maximum, ``z(xi) = 1, z'(xi) = 0``, and runs
to the first roots ``a(xi) > xi`` and ``b(xi) < xi``.  The equation is even
in ``x``, so the leftward shot is the rightward shot from ``-xi`` reflected.
Roots of ``F(xi) = a(xi) + b(xi)`` with ``xi > 0`` give solutions whose
maximum is off-centre; ``xi = 0`` gives the even solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ivp
from .errors import InvalidRoot, NoRootFound, PreconditionError
from .ivp import Action, Direction, EventSpec, OdeSystem, Trajectory

__all__ = [
    "HenonProfile",
    "HenonResult",
    "HenonShot",
    "XiRoot",
    "XiScan",
    "build_solutions",
    "find_xi0",
    "scan_shots",
    "shoot",
]

INITIAL_WINDOW = 4.0
MAX_DOUBLINGS = 12
SCAN_REL_TOL = 1e-9
SCAN_NOISE_FACTOR = 10.0
ROOT_RESIDUAL_TOL = 1e-8
RESIDUAL_GRID = 200


def _check_params(alpha: float, p: float) -> None:
    if not alpha > 0:
        raise PreconditionError(f"alpha must be positive, got {alpha!r}")
    if not p > 1:
        raise PreconditionError(f"p must exceed 1, got {p!r}")


def _system(alpha: float, p: float) -> OdeSystem:
    pm1 = p - 1.0

    # odd extension of z^p keeps trial stages past the root finite
    def rhs(x, y):
        z = y[0]
        return (y[1], -(abs(x) ** alpha) * z * abs(z) ** pm1)

    return OdeSystem(rhs, 2, name="henon")


@dataclass(frozen=True, eq=False)
class _HalfShot:
    root: float
    trajectory: Trajectory


def _first_root(start: float, alpha: float, p: float, rel_tol: float, abs_tol: float) -> _HalfShot:
    """First root to the right of ``start`` for ``z(start) = 1, z'(start) = 0``."""
    sys = _system(alpha, p)
    root = EventSpec(lambda x, y: y[0], Direction.DOWN, Action.STOP, name="root")
    width = INITIAL_WINDOW
    for _ in range(MAX_DOUBLINGS):
        bps = (0.0,) if start < 0.0 else ()
        traj, events = ivp.integrate(
            sys, start, (1.0, 0.0), start + width, rel_tol, abs_tol, (root,), breakpoints=bps
        )
        if events:
            # rerun so the last step ends on the root; the truncated step's
            # interpolant derivative is too coarse for the endpoint residual
            x_root = events[-1].t
            traj, _ = ivp.integrate(sys, start, (1.0, 0.0), x_root, rel_tol, abs_tol, breakpoints=bps)
            return _HalfShot(x_root, traj)
        width *= 2.0
    raise NoRootFound(f"no root within {width / 2!r} of x={start!r}")


@dataclass(frozen=True, eq=False)
class HenonShot:
    """Roots ``b < xi < a`` of the shot with maximum at ``xi``."""

    xi: float
    a: float
    b: float
    forward: Trajectory = field(repr=False)
    backward: Trajectory = field(repr=False)

    @property
    def F(self) -> float:
        return self.a + self.b

    def __call__(self, x) -> np.ndarray:
        """Shot profile ``z(x)`` on ``[b, a]``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        right = x >= self.xi
        out[right] = self.forward.evaluate(np.clip(x[right], self.xi, self.a))[:, 0]
        out[~right] = self.backward.evaluate(np.clip(-x[~right], -self.xi, -self.b))[:, 0]
        return out

    def second_derivative(self, x) -> np.ndarray:
        """``z''`` from the dense output (differentiated ``z'`` component)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        right = x >= self.xi
        out[right] = self.forward.derivative(np.clip(x[right], self.xi, self.a))[:, 1]
        # y(s) = z(-s): z''(x) = y''(-x)
        out[~right] = self.backward.derivative(np.clip(-x[~right], -self.xi, -self.b))[:, 1]
        return out


def shoot(
    xi: float,
    alpha: float,
    p: float,
    rel_tol: float = ivp.DEFAULT_REL_TOL,
    abs_tol: float = ivp.DEFAULT_ABS_TOL,
) -> HenonShot:
    """Shoot from ``z(xi) = 1, z'(xi) = 0`` to both first roots."""
    _check_params(alpha, p)
    if not xi >= 0:
        raise PreconditionError(f"xi must be >= 0, got {xi!r}")
    fwd = _first_root(float(xi), alpha, p, rel_tol, abs_tol)
    bwd = fwd if xi == 0 else _first_root(-float(xi), alpha, p, rel_tol, abs_tol)
    return HenonShot(float(xi), fwd.root, -bwd.root, fwd.trajectory, bwd.trajectory)


# -- vectorised shots for grid scans ------------------------------------------------


def _batch_first_roots(
    starts: np.ndarray, alpha: float, p: float, rel_tol: float, abs_tol: float
) -> np.ndarray:
    """First roots to the right of every ``start`` at once.

    Same Dormand-Prince pair as :func:`gencurve.ivp.integrate`, with an
    independent step size per shot; a step boundary is forced at ``x = 0``.
    """
    A, B, C, E, P = ivp._A, ivp._B, ivp._C, ivp._E, ivp._P
    m = starts.size
    x = starts.astype(float).copy()
    z = np.ones(m)
    v = np.zeros(m)
    h = np.full(m, 1e-2)
    roots = np.full(m, np.nan)
    limit = starts + INITIAL_WINDOW * 2.0 ** (MAX_DOUBLINGS - 1)
    active = np.arange(m)
    pm1 = p - 1.0

    def f(xx, zz, vv):
        return vv, -(np.abs(xx) ** alpha) * zz * np.abs(zz) ** pm1

    fz, fv = f(x, z, v)
    with np.errstate(all="ignore"):
        for _ in range(200_000):
            if active.size == 0:
                break
            xa, za, va, ha = x[active], z[active], v[active], h[active]
            # land exactly on x = 0 when crossing it
            cross0 = (xa < 0.0) & (xa + ha > 0.0)
            ha = np.where(cross0, -xa, ha)
            kz = [fz[active]]
            kv = [fv[active]]
            for i in range(1, 6):
                zi = za + ha * sum(A[i, j] * kz[j] for j in range(i))
                vi = va + ha * sum(A[i, j] * kv[j] for j in range(i))
                gz, gv = f(xa + C[i] * ha, zi, vi)
                kz.append(gz)
                kv.append(gv)
            zn = za + ha * sum(B[j] * kz[j] for j in range(6))
            vn = va + ha * sum(B[j] * kv[j] for j in range(6))
            xn = np.where(cross0, 0.0, xa + ha)
            gz7, gv7 = f(xn, zn, vn)
            kz.append(gz7)
            kv.append(gv7)
            ez = ha * sum(E[j] * kz[j] for j in range(7))
            ev = ha * sum(E[j] * kv[j] for j in range(7))
            sz = abs_tol + rel_tol * np.maximum(np.abs(za), np.abs(zn))
            sv = abs_tol + rel_tol * np.maximum(np.abs(va), np.abs(vn))
            err = np.sqrt(0.5 * ((ez / sz) ** 2 + (ev / sv) ** 2))
            ok = np.isfinite(err) & (err <= 1.0)
            factor = np.where(
                ok,
                np.minimum(10.0, 0.9 * np.where(err > 0, err, 1e-10) ** -0.2),
                np.maximum(0.2, 0.9 * np.where(np.isfinite(err), err, 1e10) ** -0.2),
            )

            hit = ok & (zn <= 0.0)
            if hit.any():
                # bisection on the step's quartic interpolant
                Kz = np.stack(kz, axis=-1)[hit]
                Q = Kz @ P
                hh, z0 = ha[hit], za[hit]
                lo = np.zeros(hh.size)
                hi = np.ones(hh.size)
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    val = z0 + hh * np.einsum(
                        "kj,kj->k", Q, np.stack([mid, mid**2, mid**3, mid**4], axis=-1)
                    )
                    pos = val > 0.0
                    lo = np.where(pos, mid, lo)
                    hi = np.where(pos, hi, mid)
                roots[active[hit]] = xa[hit] + 0.5 * (lo + hi) * hh

            acc = ok & ~hit
            idx = active[acc]
            x[idx], z[idx], v[idx] = xn[acc], zn[acc], vn[acc]
            fz[idx], fv[idx] = gz7[acc], gv7[acc]
            h[active] = ha * factor
            keep = ~hit & (x[active] < limit[active])
            active = active[keep]
    if np.isnan(roots).any():
        bad = starts[np.isnan(roots)][0]
        raise NoRootFound(f"no root found for the shot starting at x={bad!r}")
    return roots


def scan_shots(
    xis: np.ndarray,
    alpha: float,
    p: float,
    rel_tol: float = SCAN_REL_TOL,
    abs_tol: float = ivp.DEFAULT_ABS_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """``(a(xi), b(xi))`` over a grid, all shots integrated together."""
    _check_params(alpha, p)
    xis = np.asarray(xis, dtype=float)
    if np.any(xis < 0):
        raise PreconditionError("xi must be >= 0")
    roots = _batch_first_roots(np.concatenate([xis, -xis]), alpha, p, rel_tol, abs_tol)
    return roots[: xis.size], -roots[xis.size :]


@dataclass(frozen=True)
class XiRoot:
    """Root of ``F = a + b`` with the sign of ``F`` just left and right of it."""

    xi0: float
    sign_left: int
    sign_right: int


@dataclass(frozen=True, eq=False)
class XiScan:
    alpha: float
    p: float
    xi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    roots: tuple[XiRoot, ...]

    @property
    def F(self) -> np.ndarray:
        return self.a + self.b

    @property
    def unique(self) -> bool:
        """Exactly one sign change on the scanned window (not a global claim)."""
        return len(self.roots) == 1


def find_xi0(
    alpha: float,
    p: float,
    lo: float = 1e-3,
    hi: float = 5.0,
    count: int = 2000,
    rel_tol: float = ivp.DEFAULT_REL_TOL,
) -> XiScan:
    """Scan ``F(xi) = a(xi) + b(xi)`` on a uniform grid and refine sign changes.

    The scan uses batched shots; every bracket is refined by bisection with
    single shots at ``rel_tol``.  Sign flips where ``|F|`` stays below the
    scan's error level at both grid points are ignored.
    """
    _check_params(alpha, p)
    if not (0.0 < lo < hi):
        raise PreconditionError("need 0 < lo < hi")
    if count < 100:
        raise PreconditionError("count must be >= 100")
    xis = np.linspace(lo, hi, count)
    a, b = scan_shots(xis, alpha, p)
    F = a + b
    # near xi = 0, F can be smaller than the shot error; such sign flips are noise
    noise = SCAN_NOISE_FACTOR * SCAN_REL_TOL * np.maximum(np.abs(a), 1.0)
    roots = []
    for k in np.nonzero(np.sign(F[:-1]) * np.sign(F[1:]) < 0)[0]:
        if max(abs(F[k]) - noise[k], abs(F[k + 1]) - noise[k + 1]) < 0:
            continue
        x0 = ivp.bisect_root(lambda xi: shoot(xi, alpha, p, rel_tol).F, xis[k], xis[k + 1])
        roots.append(XiRoot(float(x0), int(np.sign(F[k])), int(np.sign(F[k + 1]))))
    return XiScan(alpha, p, xis, a, b, tuple(roots))


# -- reconstruction ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HenonProfile:
    """``u(x) = scale * z(eta * x)`` on ``[-1, 1]``, optionally mirrored."""

    shot: HenonShot = field(repr=False)
    eta: float
    scale: float
    mirrored: bool = False

    def _arg(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(np.abs(x) > 1 + 1e-12):
            raise PreconditionError("profiles live on [-1, 1]")
        x = np.clip(x, -1.0, 1.0)
        return -x if self.mirrored else x

    def __call__(self, x) -> np.ndarray:
        s = self.eta * self._arg(x)
        s = np.clip(s, self.shot.b, self.shot.a)
        return self.scale * self.shot(s)

    def second_derivative(self, x) -> np.ndarray:
        s = np.clip(self.eta * self._arg(x), self.shot.b, self.shot.a)
        return self.scale * self.eta**2 * self.shot.second_derivative(s)


@dataclass(frozen=True, eq=False)
class HenonResult:
    """Three positive solutions at parameter ``lam``.

    ``u1`` is even, ``u2`` peaks at ``interior_max_location > 0`` and
    ``u3(x) = u2(-x)``.  ``max_value`` is the maximum of ``u2`` and
    ``residuals`` the largest equation residuals of ``(u1, u2, u3)`` on a
    200-point grid.
    """

    alpha: float
    p: float
    xi0: float
    eta: float
    lam: float
    max_value: float
    interior_max_location: float
    profiles: tuple[HenonProfile, HenonProfile, HenonProfile]
    residuals: tuple[float, float, float]
    shot: HenonShot = field(repr=False)


def _residual(prof: HenonProfile, lam: float, alpha: float, p: float) -> float:
    x = np.linspace(-1.0, 1.0, RESIDUAL_GRID)
    u = prof(x)
    res = prof.second_derivative(x) + lam * np.abs(x) ** alpha * np.abs(u) ** p * np.sign(u)
    return float(np.max(np.abs(res)))


def build_solutions(
    xi0: float,
    alpha: float,
    p: float,
    lambda_target: float | None = None,
    rel_tol: float = 1e-13,
    abs_tol: float = 1e-15,
) -> HenonResult:
    """Even and symmetry-breaking solutions from a root ``xi0`` of ``a + b``.

    With ``x`` rescaled by ``eta = a(xi0)`` and ``u = m z``, the shot solves the
    Dirichlet problem at ``lam = eta^(alpha+2) / m^(p-1)``.  Without
    ``lambda_target`` the off-centre solution keeps ``m = 1``; the even one is
    scaled to the same ``lam``.
    """
    _check_params(alpha, p)
    shot = shoot(xi0, alpha, p, rel_tol, abs_tol)
    eta = shot.a
    if abs(shot.F) > ROOT_RESIDUAL_TOL * eta:
        raise InvalidRoot(f"a + b = {shot.F!r} at xi={xi0!r} is not a root")
    a2, pm1 = alpha + 2.0, p - 1.0
    lam = eta**a2 if lambda_target is None else float(lambda_target)
    if not lam > 0:
        raise PreconditionError("lambda_target must be positive")
    m2 = (eta**a2 / lam) ** (1.0 / pm1)
    even = shot if xi0 == 0 else shoot(0.0, alpha, p, rel_tol, abs_tol)
    m1 = (even.a**a2 / lam) ** (1.0 / pm1)
    u1 = HenonProfile(even, even.a, m1)
    u2 = HenonProfile(shot, eta, m2)
    u3 = HenonProfile(shot, eta, m2, mirrored=True)
    residuals = tuple(_residual(u, lam, alpha, p) for u in (u1, u2, u3))
    return HenonResult(
        alpha=alpha,
        p=p,
        xi0=float(xi0),
        eta=eta,
        lam=lam,
        max_value=m2,
        interior_max_location=float(xi0) / eta,
        profiles=(u1, u2, u3),
        residuals=residuals,
        shot=shot,
    )
