import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from gencurve import curve
from gencurve.curve import TurnDirection
from gencurve.errors import PreconditionError, PreconditionViolated, UnsupportedFamily
from gencurve.ivp import series_start
from gencurve.problems import Family, ProblemSpec, guiding_solution

from oracles import bratu_1d_critical_lambda


def gelfand(n, alpha=0.0, **kw):
    return ProblemSpec(Family.GELFAND_EXP, n=n, alpha=alpha, **kw)


def test_bratu_1d_fold():
    c = curve.trace(gelfand(1), 1e3)
    assert len(c.turns) == 1
    assert c.turns[0].lambda_n == pytest.approx(bratu_1d_critical_lambda(), rel=1e-9)
    assert c.turns[0].direction is TurnDirection.RIGHT_TO_LEFT
    assert c.lambda_star is None


def test_planar_gelfand_fold():
    # w = -2 ln(1 + t^2/8): lam = t^2 / (1 + t^2/8)^2 peaks at t = 2 sqrt(2) with lam = 2
    c = curve.trace(ProblemSpec(Family.GELFAND_EXP, n=2), 1e3)
    assert len(c.turns) == 1
    assert c.turns[0].t_n == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-9)
    assert c.turns[0].lambda_n == pytest.approx(2.0, rel=1e-9)
    t = np.geomspace(1e-3, 1e3, 50)
    s = c.solution.sample(t)
    assert np.allclose(s["w"], -2.0 * np.log1p(t**2 / 8.0), rtol=1e-8, atol=1e-14)


def test_gelfand_n3_turns_match_scipy():
    c = curve.trace(gelfand(3), 1e4)
    assert len(c.turns) >= 3

    def rhs(t, y):
        return [y[1], -2.0 / t * y[1] - math.exp(y[0])]

    turn = lambda t, y: 2.0 + t * y[1]  # noqa: E731
    y0 = series_start(0.0, 1.0, 3, 0.0, 1e-6)
    ref = solve_ivp(rhs, (1e-6, 1e4), y0, method="DOP853", rtol=1e-13, atol=1e-16, events=turn)
    t_ref = ref.t_events[0]
    assert len(t_ref) == len(c.turns)
    for tp, tr, yr in zip(c.turns, t_ref, ref.y_events[0]):
        assert tp.t_n == pytest.approx(tr, rel=1e-7)
        assert tp.lambda_n == pytest.approx(tr**2 * math.exp(yr[0]), rel=1e-7)


def test_gelfand_n3_alternation():
    c = curve.trace(gelfand(3), 1e4)
    off = np.array([tp.lambda_offset for tp in c.turns])
    assert np.all(np.sign(off[:-1]) == -np.sign(off[1:]))
    assert np.all(np.diff(np.abs(off)) < 0)
    dirs = [tp.direction for tp in c.turns]
    assert all(a is not b for a, b in zip(dirs[:-1], dirs[1:]))
    assert np.allclose([tp.lambda_n for tp in c.turns], 2.0 + off, rtol=1e-12)
    turns, crossings = curve.count_turns_and_crossings(c)
    assert turns >= 3 and crossings >= 3 and turns >= crossings - 1


def test_crossings_enclose_turns():
    c = curve.trace(gelfand(5), 1e6)
    tn = np.array([tp.t_n for tp in c.turns])
    cr = c.guiding_crossings
    for a, b in zip(cr[:-1], cr[1:]):
        assert np.any((tn > a) & (tn < b))


def test_turns_are_nondegenerate_folds():
    c = curve.trace(ProblemSpec(Family.MEMS, n=2, p=2.0, alpha=0.2), 1e6)
    sol = c.solution
    for tp in c.turns:
        assert abs(tp.second_derivative) > 10.0 * tp.second_derivative_error
        h = 1e-3 * tp.t_n
        ind = sol.sample([tp.t_n - h, tp.t_n + h])["indicator"]
        assert ind[0] * ind[1] < 0
        expected = TurnDirection.RIGHT_TO_LEFT if tp.second_derivative < 0 else TurnDirection.LEFT_TO_RIGHT
        assert tp.direction is expected


def test_monotone_gelfand_n10():
    spec = gelfand(10)
    c = curve.trace(spec, 1e4)
    assert c.turns == () and c.guiding_crossings == ()
    assert curve.count_turns_and_crossings(c) == (0, 0)
    s = c.solution.sample(c.t)
    assert np.all(s["deviation"] < 0)
    assert np.all(np.diff(s["lambda_offset"]) > 0)
    g = guiding_solution(spec)
    assert np.all(s["w"] <= g.value(c.t))


def test_mems_curve_oscillates_to_singular_value():
    c = curve.trace(ProblemSpec(Family.MEMS, n=2, p=2.0, alpha=0.2), 1e4)
    assert len(c.turns) >= 2
    assert np.all(np.diff(c.u0) > 0)
    assert c.u0[-1] > 0.99


def test_mems_high_dimension_at_most_two_turns():
    c = curve.trace(ProblemSpec(Family.MEMS, n=8, p=2.0), 1e6)
    assert len(c.turns) <= 2


def test_mems_stops_near_pull_in():
    c = curve.trace(ProblemSpec(Family.MEMS, n=1, p=2.0), 1e8)
    assert c.t_end < 1e8
    assert c.u0[-1] == pytest.approx(1.0 - 1e-8, abs=1e-12)


def test_power_family_stops_at_root():
    c = curve.trace(ProblemSpec(Family.POWER_PLUS_ONE, n=3, p=3.0), 1e4)
    assert c.t_end < 10.0
    assert np.all(np.diff(c.u0) > 0)
    with pytest.raises(UnsupportedFamily):
        curve.count_turns_and_crossings(c)


def test_sample_doubling_keeps_turns():
    a = curve.trace(gelfand(4), 1e6)
    b = curve.trace(gelfand(4), 1e6, samples_per_decade=400)
    assert len(a.turns) == len(b.turns)
    for x, y in zip(a.turns, b.turns):
        assert abs(x.t_n - y.t_n) / x.t_n < 1e-8
    assert len(b.t) > 1.9 * len(a.t)


def test_curve_arrays_are_read_only():
    c = curve.trace(gelfand(3), 1e2)
    with pytest.raises(ValueError):
        c.lam[0] = 1.0
    pts = c.points
    assert len(pts) == len(c.t) and pts[0].t == c.t[0]


def test_trace_validates_samples():
    with pytest.raises(PreconditionError):
        curve.trace(gelfand(3), 1e2, samples_per_decade=5)


@pytest.mark.parametrize(
    "n, rhs",
    [(10, -4.0), (12, (-10.0 - math.sqrt(20.0)) / 2.0), (16, (-14.0 - math.sqrt(84.0)) / 2.0)],
)
def test_inequality_check(n, rhs):
    res = curve.check_inequality_44(n)
    assert res.rhs == pytest.approx(rhs, rel=1e-15)
    assert res.holds
    assert res.t0 == pytest.approx(math.sqrt(2 * n - 4), rel=1e-15)
    if n == 10:
        assert res.lhs == pytest.approx(-1.72324, abs=1e-3)


def test_inequality_lhs_monotone():
    lhs = [curve.check_inequality_44(n).lhs for n in range(10, 21)]
    assert np.all(np.diff(lhs) > 0)
    with pytest.raises(PreconditionError):
        curve.check_inequality_44(9)


def test_lambda_bound():
    spec = gelfand(10)
    assert curve.lambda_bound_check(spec, curve.trace(spec, 1e6))
    spec = gelfand(14, 1.0)
    c = curve.trace(spec, 1e5)
    assert curve.lambda_bound_check(spec, c)
    assert np.max(c.lam) <= 36.0 + 1e-6
    with pytest.raises(PreconditionViolated):
        curve.lambda_bound_check(gelfand(9), curve.trace(gelfand(9), 1e2))
