import math

import numpy as np
import pytest

from calibra.core import GraphWindow, IntervalDomain, PiecewiseField, SbvFunction, Span, piecewise_constant_1d
from calibra.energy import MsParams, QuadPlan, evaluate_ms_energy
from calibra.errors import PreconditionError
from calibra.examples import EXAMPLE_IDS, build_example, calibration_affine_constant
from calibra.expr import Affine, Constant, Sum
from calibra.flux import flux_integral, verify_flux_invariance, verify_lower_bound

WHOLE = GraphWindow.whole()
DOM = IntervalDomain(1.0)


def _field(fx, ft, dim=1, ext=(-5.0, 5.0), bound=1.0):
    return PiecewiseField(lambda x, t: (np.full((len(t), dim), fx), np.full(len(t), ft)), dim, bound, ext)


def _affine(lam, a=1.0):
    return SbvFunction(IntervalDomain(a), ((Span(0.0, a), Affine(0.0, (lam,))),))


STEP = piecewise_constant_1d(DOM, [0.5], [0.0, 1.0])


def test_zero_field_has_zero_flux():
    f = flux_integral(_field(0.0, 0.0), STEP, WHOLE)
    assert (f.volume_part, f.jump_part, f.total) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("u", [_affine(0.7), STEP])
def test_orientation_vertical_field_gives_minus_area(u):
    f = flux_integral(_field(0.0, 1.0), u, WHOLE)
    assert math.isclose(f.volume_part, -1.0, rel_tol=1e-12)
    assert f.jump_part == 0.0


def test_orientation_in_2d():
    B = build_example("harmonic")
    f = flux_integral(_field(0.0, 1.0, dim=2), B.u, WHOLE)
    assert math.isclose(f.total, -B.domain.measure, rel_tol=1e-12)


def test_band_field_flux_equals_affine_energy():
    f = flux_integral(calibration_affine_constant(1.0, 1.0), _affine(1.0), WHOLE)
    assert math.isclose(f.volume_part, 1.0, rel_tol=1e-12)
    assert f.jump_part == 0.0
    assert math.isclose(f.total, evaluate_ms_energy(_affine(1.0), MsParams(1.0)).total, rel_tol=1e-12)


def test_band_field_flux_of_step_is_alpha():
    u = piecewise_constant_1d(DOM, [0.5], [0.0, 1.2])
    f = flux_integral(calibration_affine_constant(1.0, 1.0), u, WHOLE)
    assert f.volume_part == 0.0
    assert abs(f.total - 1.0) <= 1e-9


def test_jump_part_integrates_vertical_column():
    # phi_x = 3 on every level: the column over a jump of height 0.5 carries 1.5
    u = piecewise_constant_1d(DOM, [0.3], [1.0, 0.5])
    f = flux_integral(_field(3.0, 0.0), u, WHOLE)
    assert math.isclose(f.jump_part, -1.5, rel_tol=1e-12)


def test_graph_outside_window_is_precondition_error():
    B = build_example("affine-window")
    with pytest.raises(PreconditionError):
        flux_integral(B.field, STEP, B.window)


def test_flux_additive_over_partition():
    phi = calibration_affine_constant(0.8, 1.0)
    whole = _affine(0.8)
    split = SbvFunction(DOM, ((Span(0.0, 0.37), Affine(0.0, (0.8,))), (Span(0.37, 1.0), Affine(0.0, (0.8,)))))
    assert abs(flux_integral(phi, whole, WHOLE).total - flux_integral(phi, split, WHOLE).total) <= 1e-9


# ---------------------------------------------------------------------------
# lower bound


def test_lower_bound_equality_for_own_candidate():
    rep = verify_lower_bound(calibration_affine_constant(1.0, 1.0), _affine(1.0), MsParams(1.0), WHOLE, DOM)
    assert rep.equality and abs(rep.gap) <= 1e-6
    assert rep.conditions_hold and rep.consistent


def test_lower_bound_for_step_competitor():
    rep = verify_lower_bound(calibration_affine_constant(1.0, 1.0), STEP, MsParams(1.0), WHOLE, DOM)
    assert rep.gap >= -1e-6
    assert math.isclose(rep.energy, 1.0)


def test_lower_bound_zero_field_gap_is_energy():
    u = _affine(0.6)
    rep = verify_lower_bound(_field(0.0, 0.0), u, MsParams(1.0), WHOLE, DOM)
    assert rep.flux == 0.0
    assert rep.gap == rep.energy >= 0
    assert not rep.equality and not rep.conditions_hold and rep.consistent


def test_lower_bound_strict_gap_flags_failed_equality_conditions():
    # the band field of slope 1 against the affine candidate of slope 0.5
    rep = verify_lower_bound(calibration_affine_constant(1.0, 1.0), _affine(0.5), MsParams(1.0), WHOLE, DOM)
    assert rep.gap > 1e-3
    assert not rep.equality and not rep.conditions_hold and rep.consistent
    assert rep.warnings


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_equality_chain_for_every_example(eid):
    B = build_example(eid)
    F = evaluate_ms_energy(B.u, B.ms).total
    fl = flux_integral(B.field, B.u, B.window).total
    assert abs(F - fl) <= 1e-5, (F, fl)


# ---------------------------------------------------------------------------
# invariance


def test_invariance_vertical_field_exact():
    rep = verify_flux_invariance(_field(0.0, 1.0), _affine(1.0), STEP, WHOLE, DOM)
    assert rep.passed and rep.difference == 0.0
    assert math.isclose(rep.flux_u, -1.0, rel_tol=1e-12) and rep.variant == "dirichlet"


def test_invariance_band_field_affine_versus_step():
    rep = verify_flux_invariance(calibration_affine_constant(1.0, 1.0), _affine(1.0), STEP, WHOLE, DOM)
    assert rep.passed and rep.difference <= 1e-5


def test_invariance_trace_mismatch_is_precondition_error():
    with pytest.raises(PreconditionError):
        verify_flux_invariance(calibration_affine_constant(1.0, 1.0), _affine(1.0), _affine(0.9), WHOLE, DOM)


def test_invariance_trace_mismatch_without_c2_is_rejected():
    with pytest.raises(PreconditionError, match="c2"):
        verify_flux_invariance(calibration_affine_constant(1.0, 1.0), _affine(1.0), _affine(0.9), WHOLE, DOM,
                               neumann=True)


def test_invariance_neumann_variant():
    # u and u + 0.1 have different traces; the field passes (c2) so the fluxes still agree
    B = build_example("neumann")
    (region, ex), = B.u.pieces
    v = SbvFunction(B.domain, ((region, Sum((ex, Constant(0.1)))),))
    rep = verify_flux_invariance(B.field, B.u, v, B.window, B.domain, QuadPlan(n_bulk_2d=200), tol=1e-4,
                                 neumann=True)
    assert rep.variant == "neumann"
    assert rep.passed and rep.difference <= 1e-4
