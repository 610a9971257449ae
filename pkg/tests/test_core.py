import json
import math

import numpy as np
import pytest

from calibra.core import (Box, DiskDomain, GraphWindow, IntervalDomain, RectangleDomain, SbvFunction, Sector, Span,
                          graph_window_contains, piecewise_constant_1d, traces_and_normal)
from calibra.errors import ConfigurationError, DomainError, ParameterError
from calibra.examples import (EXAMPLE_IDS, build_example, calibration_jump_window, jump_window,
                              pure_jump_function, triple_junction_function)
from calibra.expr import Affine


# ---------------------------------------------------------------------------
# domains


def test_domains_reject_degenerate_sizes():
    with pytest.raises(ConfigurationError):
        IntervalDomain(0.0)
    with pytest.raises((ConfigurationError, ParameterError)):
        DiskDomain((0.0, 0.0), 0.0)
    with pytest.raises((ConfigurationError, ParameterError)):
        RectangleDomain(0.0, 0.0, 0.0, 1.0)


@pytest.mark.parametrize("dom", [IntervalDomain(2.0), RectangleDomain(0.0, 2.0, -1.0, 1.0),
                                 DiskDomain((0.5, -0.5), 0.7)])
def test_boundary_normals_are_unit(dom):
    xb, nrm = dom.boundary_points(64, np.random.default_rng(0))
    assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0)
    # stepping inwards lands inside the domain, outwards leaves it
    assert np.all(dom.contains(xb - 1e-6 * nrm))
    assert not np.any(dom.contains(xb + 1e-6 * nrm))


def test_domain_measures():
    assert IntervalDomain(2.0).measure == 2.0
    assert RectangleDomain(0.0, 2.0, 0.0, 3.0).measure == 6.0
    assert math.isclose(DiskDomain((0.0, 0.0), 1.0).measure, math.pi)


# ---------------------------------------------------------------------------
# traces and normals


def test_traces_1d_step():
    u = piecewise_constant_1d(IntervalDomain(1.0), [0.5], [0.0, 1.3])
    lo, hi, nu = traces_and_normal(u, [0.5])
    assert (lo, hi) == (0.0, 1.3)
    assert np.allclose(nu, [1.0])


def test_traces_downward_step_flips_normal():
    u = piecewise_constant_1d(IntervalDomain(1.0), [0.5], [2.0, 1.0])
    lo, hi, nu = traces_and_normal(u, [0.5])
    assert (lo, hi) == (1.0, 2.0)
    assert np.allclose(nu, [-1.0])


def test_traces_triple_junction_ray():
    u = triple_junction_function(1.0, -2.0, 0.0, 2.0)
    th = 2 * math.pi / 3
    p = [0.5 * math.cos(th), 0.5 * math.sin(th)]
    lo, hi, nu = traces_and_normal(u, p)
    assert (lo, hi) == (-2.0, 0.0)
    # nu points into the b-sector: stepping along nu gives the value 0
    step = np.asarray(p) + 1e-3 * nu
    assert math.isclose(float(u.value(step[None])[0]), 0.0)
    assert math.isclose(np.linalg.norm(nu), 1.0)


def test_traces_pure_jump():
    u = pure_jump_function(0.5, 1.0, 1.2)
    lo, hi, nu = traces_and_normal(u, [0.5, 0.3])
    assert (lo, hi) == (0.0, 1.2)
    assert np.allclose(nu, [1.0, 0.0])


def test_traces_off_jump_set_is_domain_error():
    u = piecewise_constant_1d(IntervalDomain(1.0), [0.5], [0.0, 1.0])
    with pytest.raises(DomainError):
        traces_and_normal(u, [0.3])


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_piece_trace_consistency(eid):
    if eid.startswith("neumann"):
        pytest.skip("no jumps; numerical interpolant")
    u = build_example(eid).u
    worst, orient = u.check_consistency(n=100, rng=np.random.default_rng(1))
    assert worst <= 1e-8
    assert orient > 0


def test_inconsistent_traces_are_detected():
    u = piecewise_constant_1d(IntervalDomain(1.0), [0.5], [0.0, 1.0])
    bad = SbvFunction(u.domain, ((Span(0.0, 0.5), Affine(0.3, (0.0,))), u.pieces[1]), u.jumps)
    worst, _ = bad.check_consistency()
    assert worst > 0.29


def test_sbv_roundtrip_json():
    u = triple_junction_function(1.0, -2.0, 0.0, 2.0)
    d = json.loads(json.dumps(u.to_dict()))
    v = SbvFunction.from_dict(d)
    P = DiskDomain((0.0, 0.0), 1.0).sample(200, np.random.default_rng(0))
    assert np.array_equal(u.value(P), v.value(P))


# ---------------------------------------------------------------------------
# graph windows


def test_whole_window_contains_everything():
    u = piecewise_constant_1d(IntervalDomain(1.0), [0.5], [0.0, 5.0])
    wc = graph_window_contains(GraphWindow.whole(), u)
    assert wc.contained and wc.margin == math.inf


def test_affine_window_margin():
    lam, alpha = 0.8, 1.0
    B = build_example("affine-window", **{"lambda": lam, "alpha": alpha})
    wc = graph_window_contains(B.window, B.u)
    assert wc.contained
    assert math.isclose(wc.margin, alpha / (4 * lam), rel_tol=1e-12)


def test_jump_window_small_jump_is_rejected_by_the_constructor():
    # h = 0.3 violates 2 eps + sqrt(2 alpha eps) <= h for eps = 0.1.  The window
    # formula alone still contains the step (tau1(c) = -eps < 0 and h < tau2(c)),
    # so the violation is caught by the constructor, not by containment.
    c, h, eps = 0.5, 0.3, 0.1
    U = jump_window(c, h, eps)
    u = piecewise_constant_1d(IntervalDomain(1.0), [c], [0.0, h])
    wc = graph_window_contains(U, u)
    assert wc.contained
    assert math.isclose(float(U.lower(np.array([[c]]))[0]), -eps)
    with pytest.raises(ParameterError, match="eps"):
        calibration_jump_window(c, 1.0, h, 1.0, eps)


def test_graph_leaving_window_reports_witness():
    B = build_example("affine-window", **{"lambda": 1.0, "alpha": 1.0})
    v = piecewise_constant_1d(IntervalDomain(1.0), [0.5], [0.0, 1.0])
    wc = graph_window_contains(B.window, v)
    assert not wc.contained
    assert wc.margin < 0


# ---------------------------------------------------------------------------
# regions and fields


def test_region_quadrature_weights_sum_to_area():
    _, w = Box((0.0, 0.0), (2.0, 1.0)).quadrature(50)
    assert math.isclose(w.sum(), 2.0)
    _, w = Sector((0.0, 0.0), 0.0, 1.0, 0.0, 2 * math.pi / 3).quadrature(100)
    assert math.isclose(w.sum(), math.pi / 3, rel_tol=1e-12)
    _, w = Box((-1.0, -1.0), (1.0, 1.0), ((0.0, 0.0, 0.5),)).quadrature(400)
    assert abs(w.sum() - (4 - math.pi / 4)) < 1e-2


@pytest.mark.parametrize("region", [Span(0.0, 1.0), Box((0.0, 0.0), (1.0, 2.0)),
                                    Sector((0.0, 0.0), 0.2, 1.0, 0.0, 2.0)])
def test_cell_refinement_conserves_weight(region):
    shape, P, w, refine = region.cells(16)
    assert P.shape[0] == int(np.prod(shape))
    idx = np.arange(0, P.shape[0], 3)
    Ps, ws, owner = refine(idx, 4)
    coarse = w[idx]
    fine = np.bincount(owner, ws, minlength=idx.size)
    assert np.allclose(coarse, fine, rtol=1e-2)


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_field_bound_holds_on_samples(eid):
    B = build_example(eid)
    assert B.field.max_norm(10_000, B.domain) <= B.field.bound * (1 + 1e-12)
