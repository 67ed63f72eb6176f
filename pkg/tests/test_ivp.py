import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from gencurve import ivp
from gencurve.errors import NoSignChange, PreconditionError
from gencurve.ivp import Action, Direction, EventSpec, OdeSystem, Termination
from gencurve.problems import Family, ProblemSpec, generating_system, solve_generating

from oracles import rk4

DECAY = OdeSystem(lambda t, y: (-y[0],), 1, name="decay")
OSCILLATOR = OdeSystem(lambda t, y: (y[1], -y[0]), 2, name="oscillator")


def test_exponential_decay():
    traj, _ = ivp.integrate(DECAY, 1.0, [1.0], 2.0)
    assert traj.termination is Termination.REACHED_END
    assert traj(2.0)[0] == pytest.approx(math.exp(-1.0), abs=1e-10)


def test_cosine_first_root():
    eps = 1e-6
    root = EventSpec(lambda t, y: y[0], Direction.DOWN, Action.STOP, name="root")
    traj, events = ivp.integrate(OSCILLATOR, eps, [1.0, 0.0], 10.0, events=[root])
    assert traj.termination is Termination.EVENT_STOP
    assert len(events) == 1
    # started at eps with cos phase, so the root sits at pi/2 + eps
    assert events[0].t == pytest.approx(math.pi / 2 + eps, abs=1e-9)
    assert traj.t_end == events[0].t


def test_recorded_events_do_not_stop():
    zero = EventSpec(lambda t, y: y[0], Direction.ANY)
    traj, events = ivp.integrate(OSCILLATOR, 0.0, [1.0, 0.0], 10.0, events=[zero])
    assert traj.termination is Termination.REACHED_END
    expected = [math.pi / 2 + k * math.pi for k in range(3)]
    assert [e.t for e in events] == pytest.approx(expected, abs=1e-9)


def test_event_direction_filter():
    up = EventSpec(lambda t, y: y[0], Direction.UP)
    _, events = ivp.integrate(OSCILLATOR, 0.0, [1.0, 0.0], 10.0, events=[up])
    assert [e.t for e in events] == pytest.approx([1.5 * math.pi], abs=1e-9)


@pytest.mark.parametrize(
    "origin, forcing, n, alpha, w, dw",
    [
        (0.0, 1.0, 3, 0.0, -1e-12 / 6, -1e-6 / 3),
        (1.0, -1.0, 2, 0.0, 1.0 + 2.5e-13, 5e-7),
        (0.0, 1.0, 3, 1.0, -1e-18 / 12, -3e-12 / 12),
    ],
)
def test_series_start(origin, forcing, n, alpha, w, dw):
    y = ivp.series_start(origin, forcing, n, alpha, 1e-6)
    assert y[0] == pytest.approx(w, rel=1e-12)
    assert y[1] == pytest.approx(dw, rel=1e-12)


def test_refine_root_linear():
    traj, _ = ivp.integrate(OdeSystem(lambda t, y: (1.0,), 1), 1.0, [1.0], 10.0)
    t = ivp.refine_root(traj, lambda t, y: y[0] - 5.0, (1.0, 10.0))
    assert t == pytest.approx(5.0, abs=1e-12)


def test_refine_root_equal_signs():
    traj, _ = ivp.integrate(OdeSystem(lambda t, y: (1.0,), 1), 1.0, [1.0], 10.0)
    with pytest.raises(NoSignChange):
        ivp.refine_root(traj, lambda t, y: y[0] + 1.0, (1.0, 10.0))
    with pytest.raises(NoSignChange):
        ivp.bisect_root(lambda x: x * x + 1.0, -1.0, 1.0)


def test_power_family_first_root_matches_scipy():
    spec = ProblemSpec(Family.POWER_PLUS_ONE, n=3, p=2.0)
    sol = solve_generating(spec, 1e4)
    assert sol.termination is Termination.EVENT_STOP

    def rhs(t, y):
        return [y[1], -2.0 / t * y[1] - abs(y[0]) ** 2 * np.sign(y[0])]

    hit = lambda t, y: y[0]  # noqa: E731
    hit.terminal, hit.direction = True, -1
    y0 = ivp.series_start(1.0, 1.0, 3, 0.0, 1e-6)
    ref = solve_ivp(rhs, (1e-6, 1e4), y0, method="DOP853", rtol=1e-13, atol=1e-15, events=hit)
    assert sol.t_end == pytest.approx(ref.t_events[0][0], rel=1e-9)


def test_gelfand_approaches_guide_rk4_oracle():
    spec = ProblemSpec(Family.GELFAND_EXP, n=3)
    w = float(solve_generating(spec, 1e4).sample(1e4)["w"][0])
    assert abs(w - (math.log(2.0) - 2.0 * math.log(1e4))) < 0.05
    # fixed-step RK4 in s = ln t from the series start, far finer than needed
    sys, _ = generating_system(spec)
    y0 = ivp.series_start(0.0, 1.0, 3, 0.0, 1e-6)

    def rhs_s(s, y):
        t = math.exp(s)
        f = sys.rhs(t, y)
        return np.array([t * f[0], t * f[1]])

    ref = rk4(rhs_s, math.log(1e-6), y0, math.log(1e4), 40000)
    assert w == pytest.approx(ref[0], abs=1e-6)


def test_dense_output_exact_at_nodes():
    sol = solve_generating(ProblemSpec(Family.GELFAND_EXP, n=3), 100.0, guided=False)
    tr = sol.trajectory
    assert np.array_equal(tr.evaluate(tr.nodes), tr.states)
    for k in (0, len(tr.nodes) // 2, len(tr.nodes) - 1):
        assert np.array_equal(tr(tr.nodes[k]), tr.states[k])


def test_dense_output_derivative_matches_rhs():
    traj, _ = ivp.integrate(OSCILLATOR, 0.0, [1.0, 0.0], 5.0)
    ts = np.linspace(0.1, 4.9, 17)
    d = traj.derivative(ts)
    assert np.allclose(d[:, 0], -np.sin(ts), atol=1e-8)
    assert np.allclose(d[:, 1], -np.cos(ts), atol=1e-8)


def test_evaluation_outside_window():
    traj, _ = ivp.integrate(DECAY, 1.0, [1.0], 2.0)
    with pytest.raises(PreconditionError):
        traj(2.5)
    with pytest.raises(PreconditionError):
        traj.evaluate([0.5])


def test_trajectory_is_immutable():
    traj, _ = ivp.integrate(DECAY, 1.0, [1.0], 2.0)
    with pytest.raises(ValueError):
        traj.states[0, 0] = 3.0


def test_blow_up_reported_with_last_state():
    sol = solve_generating(ProblemSpec(Family.GELFAND_EXP_NEG, n=3), 1e4)
    assert sol.termination is Termination.BLOW_UP
    assert 0 < sol.t_end < 10.0
    # w ~ 2 ln(t1 - t): the step size underflows long before |w| reaches 700
    last = sol.trajectory.states[-1]
    assert np.all(np.isfinite(last)) and last[0] < -20.0 and last[1] < -1e6


@pytest.mark.parametrize(
    "spec",
    [
        ProblemSpec(Family.GELFAND_EXP, n=3),
        ProblemSpec(Family.GELFAND_EXP, n=3, alpha=1.0),
        ProblemSpec(Family.GELFAND_EXP_NEG, n=3),
        ProblemSpec(Family.POWER_PLUS_ONE, n=3, p=2.0),
        ProblemSpec(Family.MEMS, n=2, p=2.0, alpha=0.2),
        ProblemSpec(Family.MEMS, n=1, p=3.0),
    ],
    ids=lambda s: f"{s.family.value}-n{s.n:g}-a{s.alpha:g}",
)
def test_start_point_insensitivity(spec):
    a = solve_generating(spec, 2.0, guided=False).sample(1.0)
    b = solve_generating(spec.replace(t_start=spec.t_start / 10), 2.0, guided=False).sample(1.0)
    assert abs(a["w"][0] - b["w"][0]) < 10 * spec.abs_tol
    assert abs(a["dw"][0] - b["dw"][0]) < 10 * spec.abs_tol


def test_halving_tolerance_moves_events_little():
    zero = EventSpec(lambda t, y: y[0], Direction.ANY)
    _, e1 = ivp.integrate(OSCILLATOR, 0.0, [1.0, 0.0], 30.0, 1e-10, events=[zero])
    _, e2 = ivp.integrate(OSCILLATOR, 0.0, [1.0, 0.0], 30.0, 5e-11, events=[zero])
    assert len(e1) == len(e2)
    assert max(abs(a.t - b.t) for a, b in zip(e1, e2)) < 1e-8


def test_singular_origin_rejects_zero_start():
    sys, _ = generating_system(ProblemSpec(Family.GELFAND_EXP, n=3))
    with pytest.raises(PreconditionError):
        ivp.integrate(sys, 0.0, [0.0, 0.0], 1.0)


def test_breakpoint_forces_step_boundary():
    traj, _ = ivp.integrate(DECAY, 0.0, [1.0], 3.0, breakpoints=[1.234])
    assert 1.234 in traj.nodes
