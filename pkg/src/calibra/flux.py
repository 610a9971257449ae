"""Flux of a vector field through the completed graph of a candidate.

For the subgraph indicator ``1_u`` the measure ``D1_u`` is carried by the
graph.  On the regular part its density with respect to ``dx`` is
``(grad u, -1)``; on each vertical segment ``{x} x [u-, u+]`` over the jump
set it is ``(nu_u, 0)`` per unit ``dt dH^{n-1}``.  Hence

    flux = int_Omega [phi_x(x, u) . grad u - phi_t(x, u)] dx
         + int_{S_u} nu_u . int_{u-}^{u+} phi_x dt dH^{n-1}.

The constant field ``(0, 1)`` gives ``-|Omega|``, which pins the sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calib import SamplePlan, check_a2_ms, check_b2_ms, check_c2_neumann
from .core import graph_window_contains
from .energy import QuadPlan, evaluate_ms_energy
from .errors import PreconditionError
from .quadrature import vertical_integrals


@dataclass(frozen=True)
class FluxValue:
    volume_part: float
    jump_part: float

    @property
    def total(self):
        return self.volume_part + self.jump_part

    def to_dict(self):
        return {"volume_part": self.volume_part, "jump_part": self.jump_part, "total": self.total}


def _density(phi, ex, P):
    v, gu = ex.value(P), ex.grad(P)
    px, pt = phi(P, v)
    return (px * gu).sum(1) - pt, v


def _crossing_cells(phi, P, v, shape):
    """Cells whose field region differs from a grid neighbour's."""
    S = (phi.level_sets(P, v) < 0).reshape(shape + (-1,))
    flag = np.zeros(shape, bool)
    for ax in range(len(shape)):
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[ax], hi[ax] = slice(None, -1), slice(1, None)
        d = np.any(S[tuple(lo)] != S[tuple(hi)], axis=-1)
        flag[tuple(lo)] |= d
        flag[tuple(hi)] |= d
    return np.flatnonzero(flag)


def _volume_part(phi, ex, region, n, s):
    """Midpoint rule; cells where the graph crosses a field interface get ``s`` sub-midpoints per axis."""
    if not (s and phi.regions and hasattr(region, "cells")):
        P, w = region.quadrature(n)
        return float((_density(phi, ex, P)[0] * w).sum())
    shape, P, w, refine = region.cells(n)
    dens, v = _density(phi, ex, P)
    idx = _crossing_cells(phi, P, v, shape)
    if idx.size:
        Ps, ws, owner = refine(idx, s)
        fine = np.bincount(owner, _density(phi, ex, Ps)[0] * ws, minlength=idx.size)
        w = w.copy()
        w[idx] = 0.0
        return float((dens * w).sum() + fine.sum())
    return float((dens * w).sum())


def flux_integral(phi, u, U, q=None, check_window=True):
    q = QuadPlan() if q is None else q
    if check_window:
        wc = graph_window_contains(U, u)
        if not wc.contained:
            raise PreconditionError(f"graph of u is not inside U (margin {wc.margin:.3g} at {wc.witness})")
    vol = 0.0
    for region, ex in u.pieces:
        vol += _volume_part(phi, ex, region, q.bulk(u.dim), q.refine)
    jmp = 0.0
    for P, w, nrm, lo, hi in u.jump_quadrature(q.n_jump):
        integral = vertical_integrals(phi, P, lo, hi, "x")
        jmp += float(((integral * nrm).sum(1) * w).sum())
    return FluxValue(vol, jmp)


@dataclass
class LowerBoundReport:
    energy: float
    flux: float
    gap: float
    equality: bool
    conditions_hold: bool
    consistent: bool
    warnings: list

    def to_dict(self):
        return {"energy": self.energy, "flux": self.flux, "gap": self.gap, "equality": self.equality,
                "conditions_hold": self.conditions_hold, "consistent": self.consistent,
                "warnings": self.warnings}


def verify_lower_bound(phi, u, p, U, domain, q=None, tol=1e-5, plan=None):
    """Compare ``F(u)`` with the flux of ``phi``; equality should coincide with (a2), (b2) passing."""
    plan = plan or SamplePlan(tol_analytic=1e-7, tol_numeric=1e-6)
    F = evaluate_ms_energy(u, p, q).total
    fl = flux_integral(phi, u, U, q).total
    gap = F - fl
    warnings = []
    try:
        a2 = check_a2_ms(phi, u, p, U, domain, plan)
        b2 = check_b2_ms(phi, u, p.alpha, U, plan)
        holds = a2.passed and b2.passed
        if not holds:
            warnings.append(f"a2 deviation {a2.margin:.3g}, b2 deviation {b2.margin:.3g}")
    except PreconditionError as exc:
        holds = False
        warnings.append(str(exc))
    if gap < -tol:
        warnings.append(f"lower bound violated by {-gap:.3g}")
    equality = abs(gap) <= tol
    return LowerBoundReport(F, fl, gap, equality, holds, equality == holds and gap >= -tol, warnings)


@dataclass
class InvarianceReport:
    flux_u: float
    flux_v: float
    difference: float
    passed: bool
    variant: str

    def to_dict(self):
        return {"flux_u": self.flux_u, "flux_v": self.flux_v, "difference": self.difference,
                "passed": self.passed, "variant": self.variant}


def same_trace(u, v, domain, n=400, tol=1e-9):
    """Compare boundary values of ``u`` and ``v`` from just inside the domain."""
    xb, nrm = domain.boundary_points(n)
    y = xb - 1e-9 * domain.diam * nrm
    a, b = u.value(y), v.value(y)
    ok = np.isfinite(a) & np.isfinite(b)
    return bool(np.all(np.abs(a[ok] - b[ok]) <= tol + 1e-6 * domain.diam))


def verify_flux_invariance(phi, u, v, U, domain, q=None, tol=1e-5, neumann=False, plan=None):
    """Check that the flux of a divergence-free field does not depend on the candidate.

    Candidates must share their boundary trace unless ``neumann`` is set, in
    which case the field has to pass the boundary condition (c2).
    """
    variant = "dirichlet"
    if not same_trace(u, v, domain):
        if not neumann:
            raise PreconditionError("u and v have different boundary traces")
        c2 = check_c2_neumann(phi, domain, U, plan or SamplePlan())
        if not c2.passed:
            raise PreconditionError(f"traces differ and the field fails (c2): {c2.margin:.3g}")
        variant = "neumann"
    fu = flux_integral(phi, u, U, q).total
    fv = flux_integral(phi, v, U, q).total
    diff = abs(fu - fv)
    return InvarianceReport(fu, fv, diff, diff <= tol, variant)
