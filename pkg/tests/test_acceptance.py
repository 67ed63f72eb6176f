"""Acceptance criteria 1-9, one test each.

Every test records a PASS/FAIL line that is echoed in the pytest summary.
Run standalone with ``python tests/test_acceptance.py`` for the same lines.
"""

import math
import time

import numpy as np
import pytest

from gencurve import curve, henon, morse
from gencurve.problems import Family, ProblemSpec, guiding_solution, lambda_star, solve_generating

from oracles import shoot_dirichlet

HENON_WINDOW = (1e-3, 5.0, 2000)


def gelfand(n, alpha=0.0, **kw):
    return ProblemSpec(Family.GELFAND_EXP, n=n, alpha=alpha, **kw)


def mems(p, n, alpha, **kw):
    return ProblemSpec(Family.MEMS, n=n, alpha=alpha, p=p, **kw)


def test_criterion_1_oscillatory_regime(record_criterion):
    lines, ok = [], True
    for n in range(3, 10):
        t0 = time.perf_counter()
        c = curve.trace(gelfand(n), 1e6)
        elapsed = time.perf_counter() - t0
        turns, crossings = curve.count_turns_and_crossings(c)
        off = np.array([tp.lambda_offset for tp in c.turns])
        alternates = bool(np.all(np.sign(off[:-1]) == -np.sign(off[1:])))
        shrinking = bool(np.all(np.diff(np.abs(off)) < 0))
        good = (
            turns >= 4
            and alternates
            and shrinking
            and turns >= crossings - 1
            and c.lambda_star == 2.0 * (n - 2)
            and elapsed < 10.0
        )
        ok &= good
        lines.append(f"n={n}:{turns}t/{crossings}x/{elapsed:.2f}s")
    record_criterion(1, ok, " ".join(lines))
    assert ok


def test_criterion_2_monotone_regime(record_criterion):
    lines, ok = [], True
    for n in (10, 12, 16):
        spec = gelfand(n)
        c = curve.trace(spec, 1e6)
        s = c.solution.sample(c.t)
        # lam - lam* and w - w0 are carried exactly; lam itself saturates at lam*
        increasing = bool(np.all(np.diff(s["lambda_offset"]) > 0) and np.all(np.diff(c.lam) >= 0))
        bounded = float(np.max(c.lam)) <= 2.0 * (n - 2) + 1e-6
        below = bool(np.all(s["deviation"] < 0))
        good = len(c.turns) == 0 and increasing and bounded and below
        ok &= good
        lines.append(f"n={n}:turns={len(c.turns)},sup-lam*={np.max(s['lambda_offset']):.2e}")
    record_criterion(2, ok, " ".join(lines))
    assert ok


def test_criterion_3_inequality_check(record_criterion):
    results = [curve.check_inequality_44(n) for n in range(10, 21)]
    first = results[0]
    lhs = np.array([r.lhs for r in results])
    rhs = np.array([r.rhs for r in results])
    ok = (
        abs(first.lhs - (-1.72324)) <= 1e-3
        and first.rhs == -4.0
        and bool(np.all(np.diff(lhs) > 0))
        and bool(np.all(np.diff(rhs) < 0))
        and all(r.holds for r in results)
    )
    record_criterion(3, ok, f"lhs(10)={first.lhs:.6f} rhs(10)={first.rhs} lhs(20)={lhs[-1]:.5f}")
    assert ok


def test_criterion_4_generalized_threshold(record_criterion):
    below = curve.trace(gelfand(12, 1.0), 1e6)
    above = curve.trace(gelfand(14, 1.0), 1e6)
    ok = len(below.turns) >= 3 and len(above.turns) <= 2
    record_criterion(4, ok, f"(12,1): {len(below.turns)} turns, (14,1): {len(above.turns)} turns")
    assert ok


def test_criterion_5_mems(record_criterion):
    spec = mems(2.0, 2, 0.2)
    c = curve.trace(spec, 1e6)
    ls = lambda_star(spec)
    lam_1e4 = float(c.solution.sample(1e4)["lam"][0])
    approaches = abs(lam_1e4 / ls - 1.0) <= 0.02 and abs(ls - (2.2 / 3.0) ** 2) < 1e-15
    off = np.array([tp.lambda_offset for tp in c.turns])
    oscillates = bool(np.all(np.sign(off[:-1]) == -np.sign(off[1:])))
    to_one = bool(np.all(np.diff(c.u0) > 0)) and c.u0[-1] > 0.9999
    high = curve.trace(mems(2.0, 8, 0.0), 1e6)
    ok = len(c.turns) >= 2 and approaches and oscillates and to_one and len(high.turns) <= 2
    record_criterion(
        5,
        ok,
        f"turns={len(c.turns)} u0_end={c.u0[-1]:.6f} lam(1e4)={lam_1e4:.5f} lam*={ls:.5f} "
        f"(2,8,0): {len(high.turns)} turns",
    )
    assert ok


def _morse_case(spec, n_turns):
    c = curve.trace(spec, 1e6)
    prof = morse.morse_profile(spec, c, probes_per_arc=3)
    ladder = prof.ladder[: n_turns + 1]
    mismatch, nondegenerate = 0.0, True
    for k, tp in enumerate(c.turns):
        rep = morse.turning_report(c, k)
        mismatch = max(mismatch, rep.eigenfunction_mismatch)
        nondegenerate &= abs(tp.second_derivative) > 10.0 * tp.second_derivative_error
    return ladder, prof.consistent, mismatch, nondegenerate


def test_criterion_6_morse_ladder(record_criterion):
    ladder_g, cons_g, mis_g, nd_g = _morse_case(gelfand(3), 3)
    ladder_m, cons_m, mis_m, nd_m = _morse_case(mems(2.0, 2, 0.2), 2)
    ok = (
        ladder_g == [0, 1, 2, 3]
        and ladder_m == [0, 1, 2]
        and cons_g
        and cons_m
        and max(mis_g, mis_m) <= 1e-5
        and nd_g
        and nd_m
    )
    record_criterion(
        6, ok, f"gelfand n=3 {ladder_g}, mems {ladder_m}, max mismatch {max(mis_g, mis_m):.1e}"
    )
    assert ok


def _henon(alpha, p):
    t0 = time.perf_counter()
    sc = henon.find_xi0(alpha, p, *HENON_WINDOW)
    builds = [henon.build_solutions(r.xi0, alpha, p) for r in sc.roots]
    scaled = [henon.build_solutions(r.xi0, alpha, p, lambda_target=1.0) for r in sc.roots]
    return sc, builds, scaled, time.perf_counter() - t0


def test_criterion_7_henon(record_criterion):
    sc, builds, scaled, dt = _henon(2.0, 3.0)
    sc0, _, _, dt0 = _henon(2.0, 2.0)
    ok = len(sc.roots) == 1 and len(sc0.roots) == 0 and dt < 5.0 and dt0 < 5.0
    if ok:
        b, s = builds[0], scaled[0]
        ok = max(b.residuals) < 1e-7 and max(s.residuals) < 1e-7
        # u -> m u with lam m^(p-1) fixed: both solution sets are rescalings
        ratio = s.max_value / b.max_value
        ok &= s.lam == 1.0 and abs(ratio ** (b.p - 1.0) * s.lam / b.lam - 1.0) < 1e-12
        detail = (
            f"xi0={b.xi0:.10f} lam={b.lam:.6f} residuals={max(b.residuals):.1e}/"
            f"{max(s.residuals):.1e} (2,2) roots={len(sc0.roots)} {dt:.2f}s/{dt0:.2f}s"
        )
    else:
        detail = f"(2,3) roots={len(sc.roots)} (2,2) roots={len(sc0.roots)}"
    record_criterion(7, ok, detail)
    assert ok


def _random_cases(count, seed=8):
    rng = np.random.default_rng(seed)
    fams = [Family.GELFAND_EXP, Family.GELFAND_EXP_NEG, Family.POWER_PLUS_ONE, Family.MEMS]
    cases = []
    for _ in range(count):
        fam = fams[int(rng.integers(len(fams)))]
        n = int(rng.integers(1, 10)) if fam is Family.GELFAND_EXP else int(rng.integers(1, 4))
        alpha = float(np.round(rng.uniform(0.0, 1.0), 3))
        p = float(rng.choice([2.0, 3.0]))
        spec = ProblemSpec(fam, n=n, alpha=alpha, p=p)
        gen = solve_generating(spec)
        hi = min(0.9 * gen.t_end, 100.0)
        t_b = float(math.exp(rng.uniform(math.log(0.3), math.log(hi))))
        cases.append((spec, gen, t_b))
    return cases


def test_criterion_8_oracle_equivalence(record_criterion):
    worst, labels = 0.0, []
    r = np.linspace(1e-7, 1.0, 201)
    for spec, gen, t_b in _random_cases(5):
        sol = morse.reconstruct(spec, gen, t_b)
        _, ref = shoot_dirichlet(spec.family, spec.n, spec.alpha, spec.p, sol.lam, sol.u0)
        err = float(np.max(np.abs(sol.profile(r) - ref.sol(r)[0])))
        worst = max(worst, err)
        labels.append(f"{spec.family.value}(n={spec.n:g})")
    ok = worst <= 1e-6
    record_criterion(8, ok, f"max-norm {worst:.1e} over " + ", ".join(labels))
    assert ok


ROBUST_CASES = [gelfand(n) for n in range(3, 10)] + [
    gelfand(10),
    gelfand(12),
    gelfand(16),
    gelfand(12, 1.0),
    gelfand(14, 1.0),
    mems(2.0, 2, 0.2),
    mems(2.0, 8, 0.0),
]


def test_criterion_9_robustness(record_criterion):
    ok, worst_t = True, 0.0
    for spec in ROBUST_CASES:
        base = curve.trace(spec, 1e6)
        halved = curve.trace(spec.replace(rel_tol=spec.rel_tol / 2), 1e6)
        doubled = curve.trace(spec, 1e6, samples_per_decade=400)
        counts = {len(c.turns) for c in (base, halved, doubled)}
        ok &= len(counts) == 1
        if len(counts) == 1 and base.turns:
            tb = np.array([tp.t_n for tp in base.turns])
            for other in (halved, doubled):
                to = np.array([tp.t_n for tp in other.turns])
                worst_t = max(worst_t, float(np.max(np.abs(to - tb) / tb)))
    ok &= worst_t <= 1e-8
    lo, hi, count = HENON_WINDOW
    xi = henon.find_xi0(2.0, 3.0, lo, hi, count).roots
    xi_half = henon.find_xi0(2.0, 3.0, lo, hi, count, rel_tol=5e-11).roots
    xi_dense = henon.find_xi0(2.0, 3.0, lo, hi, 2 * count).roots
    same_roots = len(xi) == len(xi_half) == len(xi_dense) == 1
    dxi = max(abs(xi[0].xi0 - xi_half[0].xi0), abs(xi[0].xi0 - xi_dense[0].xi0)) if same_roots else math.inf
    no_roots = all(
        not henon.find_xi0(2.0, 2.0, lo, hi, c, rel_tol=rt).roots
        for c, rt in ((count, 5e-11), (2 * count, 1e-10))
    )
    ok &= same_roots and dxi <= 1e-8 and no_roots
    record_criterion(
        9, ok, f"{len(ROBUST_CASES)} curves, max turn-time shift {worst_t:.1e}, xi0 shift {dxi:.1e}"
    )
    assert ok


def test_guide_value_consistency():
    # lam* and the guide used above agree with their closed forms
    g = guiding_solution(gelfand(3))
    assert g.beta == 2.0
    assert lambda_star(mems(2.0, 2, 0.2)) == pytest.approx((2.2 / 3.0) ** 2, rel=1e-15)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
