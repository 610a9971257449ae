"""Acceptance suite: one test (or parametrized group) per criterion.

Each test records a one-line pass/fail summary that ``conftest.py`` prints at
the end of the run, then asserts the criterion at its stated tolerance.
"""

import dataclasses
import math

import numpy as np
import pytest

from calibra.calib import (SamplePlan, check_b1_ms, check_b2_ms, check_box_flux, check_c1_divergence,
                           check_interface_continuity, random_boxes, verify_ms)
from calibra.core import FieldRegion, GraphWindow, PiecewiseField, RectangleDomain
from calibra.energy import MsParams, evaluate_ms_energy
from calibra.errors import ParameterError
from calibra.examples import (EXAMPLE_IDS, _harmonic_band, build_example, calibration_harmonic,
                              calibration_two_values)
from calibra.expr import HarmonicPolynomial, SineProduct
from calibra.flux import flux_integral
from calibra.oracle import Grid1d, enumerate_1d_bruteforce, generate_competitors, minimize_1d_dp
from calibra.pde import check_condition_e1

CORE = ("a1", "a2", "b1", "b2", "c1")


def _conditions(rep, names, floor):
    """Names of conditions that fail or whose margin is below ``floor``."""
    bad = []
    for name in names:
        if name not in rep:
            continue
        r = rep[name]
        # worst_margin is the slack for inequalities and minus the deviation for equalities
        if not r.passed or r.worst_margin < floor:
            bad.append(f"{name}={r.worst_margin:.3g}")
    return bad


def _dp_affine(lam, a=1.0, alpha=1.0, N=128, M=257):
    top = lam * a
    grid = Grid1d(a, N, M, min(0.0, top), max(0.0, top), dirichlet=(0.0, top))
    return minimize_1d_dp(MsParams(alpha), grid)


# ---------------------------------------------------------------------------
# 1


def test_criterion_1_affine_threshold(acceptance):
    problems = []
    for eid in ("affine-constant", "affine-cone"):
        B = build_example(eid, **{"lambda": 0.9, "alpha": 1.0, "a": 1.0})
        rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, c2=False)
        bad = _conditions(rep, CORE + ("interface-continuity",), -1e-6)
        if bad:
            problems.append(f"{eid} lambda=0.9: {bad}")
    B = build_example("affine-constant", **{"lambda": 1.1, "alpha": 1.0, "a": 1.0})
    b1 = check_b1_ms(B.field, B.window, 1.0, B.domain)
    if not b1.margin <= -0.2 + 1e-3:
        problems.append(f"b1 at lambda=1.1 is {b1.margin:.4g}")
    r09, r11 = _dp_affine(0.9), _dp_affine(1.1)
    if r09.jump_count != 0 or abs(r09.energy - 0.81) > 0.03 * 0.81:
        problems.append(f"DP lambda=0.9: {r09.energy:.4g}, {r09.jump_count} jumps")
    if r11.jump_count != 1 or abs(r11.energy - 1.0) > 0.03:
        problems.append(f"DP lambda=1.1: {r11.energy:.4g}, {r11.jump_count} jumps")
    detail = (f"b1(1.1)={b1.margin:.3f}, DP 0.9 -> {r09.energy:.4f}/{r09.jump_count} jumps, "
              f"1.1 -> {r11.energy:.4f}/{r11.jump_count} jumps")
    acceptance(1, not problems, "; ".join(problems) or detail)
    assert not problems, problems


# ---------------------------------------------------------------------------
# 2


def test_criterion_2_jump_threshold(acceptance):
    problems = []
    for eid in ("jump-constant", "jump-cone"):
        B = build_example(eid, a=1.0, alpha=1.0, h=1.2)
        assert math.isclose(B.field.params["lambda"], 1.0)
        rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, c2=False)
        bad = _conditions(rep, CORE + ("interface-continuity",), -1e-6)
        if bad:
            problems.append(f"{eid}: {bad}")
        F = evaluate_ms_energy(B.u, B.ms).total
        fl = flux_integral(B.field, B.u, B.window).total
        if abs(F - 1.0) > 1e-12 or abs(F - fl) > 1e-5:
            problems.append(f"{eid}: F={F:.8g}, flux={fl:.8g}")
    r12 = _dp_affine(1.2)
    if abs(r12.energy - 1.0) > 0.03:
        problems.append(f"DP h=1.2: {r12.energy:.4g}")
    B = build_example("jump-window", a=1.0, alpha=1.0, h=0.8, eps=0.1)
    rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, c2=False)
    bad = _conditions(rep, CORE + ("interface-continuity",), -1e-6)
    if bad:
        problems.append(f"jump-window h=0.8: {bad}")
    r08 = _dp_affine(0.8)
    if abs(r08.energy - 0.64) > 0.02 or not r08.energy < 1.0:
        problems.append(f"DP h=0.8: {r08.energy:.4g}")
    detail = f"DP h=1.2 -> {r12.energy:.4f}, h=0.8 -> {r08.energy:.4f} ({r08.jump_count} jumps), window verdict {rep.verdict}"
    acceptance(2, not problems, "; ".join(problems) or detail)
    assert not problems, problems


# ---------------------------------------------------------------------------
# 3


def _families(B):
    u = B.u
    if B.id == "triple-junction":
        return (("graph-perturbation", 10), ("junction-merge", 10))
    if u.dim == 1 and u.jumps:
        return (("graph-perturbation", 7), ("jump-shift", 7), ("jump-removal", 6))
    if u.dim == 1:
        return (("graph-perturbation", 10), ("jump-insertion", 10))
    return (("graph-perturbation", 20),)


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_criterion_3_flux_equality_and_invariance(eid, acceptance):
    B = build_example(eid)
    window = None if B.window.is_whole else B.window
    F = evaluate_ms_energy(B.u, B.ms).total
    fu = flux_integral(B.field, B.u, B.window).total
    comps = []
    for k, (family, count) in enumerate(_families(B)):
        comps += generate_competitors(B.u, family, count, seed=100 + k, window=window)
    worst_flux, worst_energy = 0.0, math.inf
    for v in comps:
        fv = flux_integral(B.field, v, B.window).total
        worst_flux = max(worst_flux, abs(fv - fu))
        worst_energy = min(worst_energy, evaluate_ms_energy(v, B.ms).total - F)
    ok = abs(F - fu) <= 1e-5 and len(comps) == 20 and worst_flux <= 1e-4 and worst_energy >= -1e-4
    detail = (f"{eid}: |F-flux|={abs(F - fu):.1e}, {len(comps)} competitors, "
              f"max flux diff {worst_flux:.1e}, min F(v)-F(u) {worst_energy:.3g}")
    acceptance(3, ok, detail if not ok else f"{eid} ok")
    assert ok, detail


# ---------------------------------------------------------------------------
# 4


def test_criterion_4_harmonic(acceptance):
    dom = RectangleDomain(-1.0, 1.0, -1.0, 1.0)
    u = HarmonicPolynomial(a=0.3)
    holds, margin = check_condition_e1(u, 1.0, dom)
    analytic = 1 - 0.6 * 0.6 * math.sqrt(2)
    problems = []
    if not holds or abs(margin - analytic) > 0.01:
        problems.append(f"e1 margin {margin:.4f}")
    B = build_example("harmonic", coef=0.3, alpha=1.0)
    rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain)
    bad = _conditions(rep, CORE + ("interface-continuity",), -1e-6)
    if bad:
        problems.append(f"band field: {bad}")
    if rep["c2"].passed:
        problems.append("c2 unexpectedly passed")
    try:
        calibration_harmonic(u, 0.4, dom)
        problems.append("constructor accepted alpha=0.4")
    except ParameterError:
        pass
    W = build_example("harmonic-window", coef=0.3, alpha=0.4)
    wrep = verify_ms(W.field, W.u, W.window, W.ms, W.domain, c2=False)
    bad = _conditions(wrep, CORE + ("interface-continuity",), -1e-6)
    if bad:
        problems.append(f"window field: {bad}")
    detail = f"e1 margin {margin:.4f}, c2 deviation {rep['c2'].margin:.3g} (expected failure), window verdict {wrep.verdict}"
    acceptance(4, not problems, "; ".join(problems) or detail)
    assert not problems, problems


# ---------------------------------------------------------------------------
# 5


def test_criterion_5_triple_junction(acceptance):
    B = build_example("triple-junction", alpha=1.0, r=1.0, a=-2.0, b=0.0, c=2.0)
    problems = []
    if not math.isclose(B.field.params["lambda"], math.sqrt(2)):
        problems.append(f"lambda {B.field.params['lambda']}")
    rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain, c2=False)
    bad = _conditions(rep, CORE + ("interface-continuity",), -1e-5)
    if bad:
        problems.append(f"conditions: {bad}")
    F = evaluate_ms_energy(B.u, B.ms).total
    if abs(F - 3.0) > 0.01:
        problems.append(f"F(u)={F:.6g}")
    comps = (generate_competitors(B.u, "junction-merge", 10, seed=5)
             + generate_competitors(B.u, "graph-perturbation", 10, seed=6))
    Fv = [evaluate_ms_energy(v, B.ms).total for v in comps]
    if len(comps) != 20 or min(Fv) < 3.0 - 1e-3:
        problems.append(f"{len(comps)} competitors, min F(v)={min(Fv):.6g}")
    detail = f"F(u)={F:.6f}, min competitor energy {min(Fv):.4f}, verdict {rep.verdict}"
    acceptance(5, not problems, "; ".join(problems) or detail)
    assert not problems, problems


# ---------------------------------------------------------------------------
# 6


def test_criterion_6_neumann_solution(acceptance):
    B = build_example("neumann", n=65, beta=1.0, alpha=1.0)
    problems = []
    res = B.extra["residual"]
    if res > 1e-8:
        problems.append(f"PDE residual {res:.3g}")
    holds, e1 = check_condition_e1(B.u.pieces[0][1], 1.0, B.domain)
    if not holds:
        problems.append(f"e1 margin {e1:.3g}")
    rep = verify_ms(B.field, B.u, B.window, B.ms, B.domain)
    bad = _conditions(rep, CORE + ("interface-continuity",), -1e-6)
    if bad:
        problems.append(f"conditions failing: {bad} (witness a1 {rep['a1'].witness})")
    if not (rep["c2"].passed and rep["c2"].margin <= 1e-4):
        problems.append(f"c2 deviation {rep['c2'].margin:.3g}")
    if rep.verdict != "neumann-calibration":
        problems.append(f"verdict {rep.verdict}")
    detail = f"residual {res:.2e}, e1 margin {e1:.3f}, c2 {rep['c2'].margin:.1e}, verdict {rep.verdict}"
    acceptance(6, not problems, "; ".join(problems + [detail]))
    assert not problems, problems


# ---------------------------------------------------------------------------
# 7


def test_criterion_7_two_values(acceptance):
    dom = RectangleDomain(-1.0, 1.0, -1.0, 1.0)
    cal = calibration_two_values(dom)
    problems = []
    b2 = check_b2_ms(cal.field, cal.u, 0.1)
    if not b2.margin <= 1e-5:
        problems.append(f"b2 deviation {b2.margin:.3g}")
    if not (math.isfinite(cal.beta0) and cal.beta0 >= 0):
        problems.append(f"beta0 {cal.beta0}")
    hi = verify_ms(cal.field, cal.u, GraphWindow.whole(), MsParams(0.1, 2 * cal.beta0, cal.g), dom)
    if hi.verdict != "neumann-calibration":
        problems.append(f"beta=2 beta0: {[r.condition for r in hi.results if not r.passed]}")
    lo = verify_ms(cal.field, cal.u, GraphWindow.whole(), MsParams(0.1, cal.beta0 / 4, cal.g), dom)
    a1 = lo["a1"]
    t_wit = a1.witness[1] if a1.witness else float("nan")
    if a1.passed or not (1 / 3 <= t_wit <= 2 / 3):
        problems.append(f"beta=beta0/4: a1 passed={a1.passed}, witness t={t_wit}")
    detail = (f"b2 deviation {b2.margin:.1e}, beta0={cal.beta0:.4f}, 2 beta0 -> {hi.verdict}, "
              f"beta0/4 -> a1 margin {a1.margin:.3g} at t={t_wit:.3f}")
    acceptance(7, not problems, "; ".join(problems) or detail)
    assert not problems, problems


# ---------------------------------------------------------------------------
# 8


def test_criterion_8_large_beta_1d(acceptance):
    N, M = 128, 257
    grid = Grid1d(1.0, N, M, -0.1, 1.0)
    g = np.sin(2 * grid.nodes)
    errs, jumps = [], []
    for beta in (1e2, 1e3, 1e4):
        r = minimize_1d_dp(MsParams(1.0, beta), grid, g)
        errs.append(float(np.max(np.abs(r.values - g))))
        jumps.append(r.jump_count)
    ok = all(j == 0 for j in jumps) and errs[0] > errs[1] > errs[2]
    detail = f"jumps {jumps}, max|u-g| {[round(e, 4) for e in errs]}"
    acceptance(8, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 9


def test_criterion_9_dp_equals_enumeration(acceptance):
    rng = np.random.default_rng(2024)
    mismatches = []
    for k in range(25):
        while True:
            N = int(rng.integers(1, 8))
            M = int(rng.integers(2, 9))
            if M ** (N + 1) <= 1_000_000:
                break
        alpha = float(rng.uniform(0.05, 2.0))
        beta = float(rng.choice([0.0, rng.uniform(0.0, 5.0)]))
        lo = float(rng.uniform(-1, 0))
        hi = lo + float(rng.uniform(0.2, 2.0))
        a = float(rng.uniform(0.3, 2.0))
        dirichlet = None
        if rng.random() < 0.5:
            lv = np.linspace(lo, hi, M)
            dirichlet = (float(lv[rng.integers(M)]), float(lv[rng.integers(M)]))
        grid = Grid1d(a, N, M, lo, hi, dirichlet=dirichlet)
        g = rng.uniform(lo, hi, N + 1)
        p = MsParams(alpha, beta)
        dp = minimize_1d_dp(p, grid, g).energy
        en = enumerate_1d_bruteforce(p, grid, g)
        if dp != en:
            mismatches.append((k, N, M, dp, en))
    ok = not mismatches
    acceptance(9, ok, "25/25 instances bit-exact" if ok else f"mismatches {mismatches}")
    assert ok, mismatches


# ---------------------------------------------------------------------------
# 10


def _broken_fields():
    # band field with phi_t scaled by 1.2: normal component jumps across the band edges
    A = build_example("affine-constant", **{"lambda": 1.0})
    f0 = A.field.func
    scaled = dataclasses.replace(A.field, name="scaled-band",
                                 func=lambda x, t: (f0(x, t)[0], 1.2 * f0(x, t)[1]))
    # (0, t): divergence 1 everywhere
    unit = PiecewiseField(lambda x, t: (np.zeros((len(t), 1)), t), 1, 3.0, (-1.0, 2.0), name="(0,t)")
    ramp = dataclasses.replace(unit, regions=(FieldRegion("all", lambda x, t: -np.ones(len(t))),))
    # band field built from a non-harmonic function
    dom = RectangleDomain(-1.0, 1.0, -1.0, 1.0)
    w = SineProduct(dom.lo, dom.hi, ((0.3, 0.0), (0.0, 0.1)))
    P = dom.grid(101)
    v = w.value(P)
    band = _harmonic_band(w, float(v.min()), float(v.max()), dom, "non-harmonic band", {})
    band = dataclasses.replace(band, bound=10.0)
    return [("scaled-band", A.window, A.domain, scaled), ("(0,t)", A.window, A.domain, ramp),
            ("non-harmonic-band", GraphWindow.whole(), dom, band)]


def test_criterion_10_divergence_checkers_agree(acceptance):
    cases = []
    for eid in EXAMPLE_IDS:
        B = build_example(eid)
        cases.append((eid, B.window, B.domain, B.field, True))
    cases += [(name, U, dom, phi, False) for name, U, dom, phi in _broken_fields()]
    plan = SamplePlan()
    disagreements, lines = [], []
    for name, U, dom, phi, expect in cases:
        c1 = check_c1_divergence(phi, U, dom, plan)
        analytic = c1.passed
        if phi.interfaces:
            analytic = analytic and check_interface_continuity(phi, U, dom, plan).passed
        boxes = random_boxes(phi, U, dom, 20, np.random.default_rng(7))
        bf = check_box_flux(phi, U, boxes)
        if analytic != bf.passed or analytic != expect:
            disagreements.append(f"{name}: analytic {analytic}, box {bf.passed}, expected {expect}")
        lines.append(f"{name}:{'ok' if analytic else 'broken'}")
    ok = not disagreements
    detail = f"{len(cases)} fields ({len(cases) - 3} examples + 3 broken) agree"
    acceptance(10, ok, "; ".join(disagreements) or detail)
    assert ok, disagreements
