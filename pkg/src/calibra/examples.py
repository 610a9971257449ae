"""Explicit calibrations for model Mumford-Shah minimizers.

Each constructor returns a :class:`PiecewiseField` with declared regions
(gate functions plus analytic divergence where available) and interfaces
(sampler plus unit normal in ``(x, t)``-space) so that the checkers in
:mod:`calibra.calib` can test it.  Validity conditions of each
construction are enforced with :class:`ParameterError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .core import (Box, DiskDomain, FieldRegion, GraphWindow, Interface, IntervalDomain, JumpArc,
                   JumpSegment, PiecewiseField, RectangleDomain, SbvFunction, Sector, Span,
                   piecewise_constant_1d, sector_constant)
from .energy import MsParams
from .errors import ConfigurationError, DomainError, ParameterError
from .expr import Affine, Constant, HarmonicPolynomial, as_points
from .pde import NeumannSolution, check_condition_e1, solve_neumann

# ---------------------------------------------------------------------------
# helpers


def _unit_rows(v):
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _zero_div(x, t):
    return np.zeros(len(t))


def _inner_sample(domain, k, rng, frac=0.01):
    """Domain samples kept a fraction ``frac`` away from the boundary."""
    if domain.kind == "interval":
        return domain.lo + domain.measure * (frac + (1 - 2 * frac) * rng.random((k, 1)))
    if domain.kind == "rectangle":
        u = frac + (1 - 2 * frac) * rng.random((k, 2))
        return np.stack([domain.x0 + (domain.x1 - domain.x0) * u[:, 0],
                         domain.y0 + (domain.y1 - domain.y0) * u[:, 1]], 1)
    rho = domain.r * (1 - frac) * np.sqrt(rng.random(k))
    th = 2 * math.pi * rng.random(k)
    return np.asarray(domain.center) + np.stack([rho * np.cos(th), rho * np.sin(th)], 1)


def _graph_interface(name, domain, f, grad_f, xs=None):
    """Interface ``t = f(x)`` with upward unit normal ``(-grad f, 1) / |.|``."""

    def sampler(k, rng):
        x = _inner_sample(domain, k, rng) if xs is None else xs(k, rng)
        return x, f(x)

    def normal(x, t):
        x = as_points(x, domain.dim)
        return _unit_rows(np.concatenate([-grad_f(x), np.ones((x.shape[0], 1))], 1))

    return Interface(name, sampler, normal)


def _stack(*cols):
    return np.stack([np.broadcast_to(c, np.shape(cols[0])) for c in cols], 1)


# ---------------------------------------------------------------------------
# affine candidate: fields on (0, a), optionally times a cross-section


def _check_positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ParameterError(f"{k} must be positive (got {v})")


def _band_field(lam, a, domain, name):
    dim = domain.dim
    lo_f = lambda x: lam * x[:, 0] / 2
    hi_f = lambda x: lam * (x[:, 0] + a) / 2
    slope = np.zeros(dim)
    slope[0] = lam / 2

    def func(x, t):
        inb = (lo_f(x) <= t) & (t <= hi_f(x))
        px = np.zeros((len(t), dim))
        px[:, 0] = np.where(inb, 2 * lam, 0.0)
        return px, np.where(inb, lam * lam, 0.0)

    regions = (FieldRegion("band", lambda x, t: _stack(lo_f(x) - t, t - hi_f(x)), _zero_div),
               FieldRegion("below", lambda x, t: t - lo_f(x), _zero_div),
               FieldRegion("above", lambda x, t: hi_f(x) - t, _zero_div))
    grad = lambda x: np.tile(slope, (x.shape[0], 1))
    interfaces = (_graph_interface("band-lower", domain, lo_f, grad),
                  _graph_interface("band-upper", domain, hi_f, grad))
    top = lam * a
    return PiecewiseField(func, dim, math.hypot(2 * lam, lam * lam), (-0.5 * top - 0.5, 1.5 * top + 0.5),
                          regions, interfaces, name, {"lambda": lam, "a": a})


def _cone_field(lam, a, domain, name):
    dim = domain.dim
    top = lam * a

    def func(x, t):
        X = x[:, 0]
        if np.any((X == 0) & (t == 0)) or np.any((X == a) & (t == top)):
            raise DomainError("cone field evaluated at an apex")
        low = (0 <= t) & (t <= lam * X)
        up = (lam * X < t) & (t <= top)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(low, t / X, np.where(up, (top - t) / (a - X), 0.0))
        s = np.where(low | up, s, 0.0)
        px = np.zeros((len(t), dim))
        px[:, 0] = 2 * s
        return px, s * s

    regions = (FieldRegion("lower-cone", lambda x, t: _stack(-t, t - lam * x[:, 0]), _zero_div),
               FieldRegion("upper-cone", lambda x, t: _stack(lam * x[:, 0] - t, t - top), _zero_div),
               FieldRegion("below", lambda x, t: t, _zero_div),
               FieldRegion("above", lambda x, t: top - t, _zero_div))
    flat = lambda x: np.zeros((x.shape[0], dim))
    e1 = np.zeros(dim)
    e1[0] = lam
    interfaces = (_graph_interface("t=0", domain, lambda x: np.zeros(x.shape[0]), flat),
                  _graph_interface("t=lambda x", domain, lambda x: lam * x[:, 0],
                                   lambda x: np.tile(e1, (x.shape[0], 1))),
                  _graph_interface("t=lambda a", domain, lambda x: np.full(x.shape[0], top), flat))
    return PiecewiseField(func, dim, math.hypot(2 * lam, lam * lam), (-0.5 * top - 0.5, 1.5 * top + 0.5),
                          regions, interfaces, name, {"lambda": lam, "a": a})


def calibration_affine_constant(lam, a, domain=None):
    """Constant field ``(2 lam, lam^2)`` on the band ``lam x / 2 <= t <= lam (x + a) / 2``, zero elsewhere.

    Calibrates ``u = lam x`` on ``(0, a)`` whenever ``a lam^2 <= alpha``;
    the condition is left to the checkers.
    """
    _check_positive(lam=lam, a=a)
    return _band_field(lam, a, domain or IntervalDomain(a), "affine-constant")


def calibration_affine_cone(lam, a, domain=None):
    """Two-cone field: ``(2 s, s^2)`` with ``s = t / x`` below ``t = lam x`` and ``s = (lam a - t) / (a - x)`` above."""
    _check_positive(lam=lam, a=a)
    return _cone_field(lam, a, domain or IntervalDomain(a), "affine-cone")


def calibration_affine_window(lam, a, alpha):
    """Window ``|t - lam x| < alpha / (4 lam)`` with the constant field ``(2 lam, lam^2)``."""
    _check_positive(lam=lam, a=a, alpha=alpha)
    w = alpha / (4 * lam)
    U = GraphWindow(lambda x: lam * as_points(x)[:, 0] - w, lambda x: lam * as_points(x)[:, 0] + w)

    def func(x, t):
        return np.full((len(t), 1), 2 * lam), np.full(len(t), lam * lam)

    phi = PiecewiseField(func, 1, math.hypot(2 * lam, lam * lam), (-w - 1.0, lam * a + w + 1.0),
                         name="affine-window", params={"lambda": lam, "a": a, "alpha": alpha})
    return U, phi


# ---------------------------------------------------------------------------
# windowed jump


def jump_window(c, h, eps):
    """Window between ``tau1`` (ramp from ``-eps`` to ``h - eps`` on ``[c, c + eps]``) and ``tau1(x + eps) + 2 eps``."""

    def tau1(x):
        X = as_points(x)[:, 0]
        return -eps + (h / eps) * np.clip(X - c, 0.0, eps)

    def tau2(x):
        X = as_points(x)[:, 0]
        return tau1((X + eps)[:, None]) + 2 * eps

    return GraphWindow(tau1, tau2)


def calibration_jump_window(c, a, h, alpha, eps, lam=None):
    """Window and slab field certifying the step ``0 -> h`` at ``c`` as a window minimizer.

    Requires ``2 eps + sqrt(2 alpha eps) <= h``; ``lam`` defaults to
    ``sqrt(alpha / (2 eps))`` and must satisfy
    ``eps + eps lam + alpha / (2 lam) <= h - eps``.
    """
    _check_positive(h=h, alpha=alpha, eps=eps, a=a)
    if not 0 < c < a:
        raise ParameterError("need 0 < c < a")
    if 2 * eps + math.sqrt(2 * alpha * eps) > h:
        raise ParameterError(f"window needs 2 eps + sqrt(2 alpha eps) <= h; "
                             f"{2 * eps + math.sqrt(2 * alpha * eps):.4g} > {h}")
    lam = math.sqrt(alpha / (2 * eps)) if lam is None else lam
    _check_positive(lam=lam)
    if eps + eps * lam + alpha / (2 * lam) > h - eps + 1e-12:
        raise ParameterError("slab slope infeasible: eps + eps lam + alpha / (2 lam) > h - eps")
    U = jump_window(c, h, eps)
    width = alpha / (2 * lam)
    lo_f = lambda x: eps + lam / 2 * (x[:, 0] - c + eps)
    hi_f = lambda x: lo_f(x) + width
    xl, xr = c - eps, c + eps

    def func(x, t):
        X = x[:, 0]
        ins = (X > xl) & (X < xr) & (lo_f(x) < t) & (t < hi_f(x))
        return np.where(ins, 2 * lam, 0.0)[:, None], np.where(ins, lam * lam, 0.0)

    regions = (
        FieldRegion("slab", lambda x, t: _stack(xl - x[:, 0], x[:, 0] - xr, lo_f(x) - t, t - hi_f(x)), _zero_div),
        FieldRegion("left", lambda x, t: x[:, 0] - xl, _zero_div),
        FieldRegion("right", lambda x, t: xr - x[:, 0], _zero_div),
        FieldRegion("below", lambda x, t: t - lo_f(x), _zero_div),
        FieldRegion("above", lambda x, t: hi_f(x) - t, _zero_div))
    dom = IntervalDomain(a)

    def strip(k, rng):
        return xl + 2 * eps * (0.01 + 0.98 * rng.random((k, 1)))

    grad = lambda x: np.full((x.shape[0], 1), lam / 2)

    def side(xv):
        def sampler(k, rng):
            x = np.full((k, 1), xv)
            return x, lo_f(x) + width * (0.01 + 0.98 * rng.random(k))

        return Interface(f"slab-side x={xv:.6g}", sampler, lambda x, t: np.tile([1.0, 0.0], (len(t), 1)))

    interfaces = (_graph_interface("slab-lower", dom, lo_f, grad, strip),
                  _graph_interface("slab-upper", dom, hi_f, grad, strip),
                  side(xl), side(xr))
    phi = PiecewiseField(func, 1, math.hypot(2 * lam, lam * lam), (-eps - 0.5, h + eps + 0.5), regions,
                         interfaces, "jump-window", {"c": c, "a": a, "h": h, "alpha": alpha, "eps": eps,
                                                     "lambda": lam})
    return U, phi


# ---------------------------------------------------------------------------
# harmonic functions


def grid_extrema(u, domain, n=201):
    """Grid minimum and maximum of ``u`` and a slack bounding what the grid may miss."""
    P = domain.grid(n)
    v = u.value(P)
    slope = float(np.linalg.norm(u.grad(P), axis=1).max())
    h = domain.diam / (n - 1)
    return float(v.min()), float(v.max()), 0.5 * h * slope


def _grid_bound(func, domain, t_fns, headroom=1.05):
    """Grid maximum of ``|phi|`` over the given t-levels, with headroom for off-grid points.

    The fields built from grid data are affine in t on every branch, so the
    maximum over t sits at a branch edge or an end of the sampled t-range;
    ``t_fns`` lists those levels as functions of x.
    """
    P = domain.grid(101)
    best = 0.0
    for tf in t_fns:
        px, pt = func(P, tf(P))
        best = max(best, float(np.sqrt((px * px).sum(1) + pt * pt).max()))
    return headroom * best


def _harmonic_band(u, m, M, domain, name, params, beta=0.0, g=None):
    """Band field between ``(u + m) / 2`` and ``(u + M) / 2``; with ``beta > 0`` the three-branch Neumann field."""
    n = domain.dim
    lo_f = lambda x: 0.5 * (u.value(x) + m)
    hi_f = lambda x: 0.5 * (u.value(x) + M)
    gfun = (lambda x: np.zeros(x.shape[0])) if g is None else g

    def func(x, t):
        uv, gu = u.value(x), u.grad(x)
        lower = t < 0.5 * (uv + m)
        upper = t > 0.5 * (uv + M)
        mid = ~(lower | upper)
        px = np.where(mid[:, None], 2 * gu, 0.0)
        if beta:
            gv = gfun(x)
            pm = (gu * gu).sum(1) - beta * (t - gv) ** 2 + beta * (t - uv) ** 2
            pl = beta * (m / 2 - uv / 2) ** 2 - beta * (m / 2 + uv / 2 - gv) ** 2
            pu = beta * (M / 2 - uv / 2) ** 2 - beta * (M / 2 + uv / 2 - gv) ** 2
            pt = np.where(mid, pm, np.where(lower, pl, pu))
        else:
            pt = np.where(mid, (gu * gu).sum(1), 0.0)
        return px, pt

    def div_mid(x, t):
        d = 2 * u.laplacian(x)
        if beta:
            d = d + 2 * beta * (gfun(x) - u.value(x))
        return d

    regions = (FieldRegion("band", lambda x, t: _stack(lo_f(x) - t, t - hi_f(x)), div_mid),
               FieldRegion("below", lambda x, t: t - lo_f(x), _zero_div),
               FieldRegion("above", lambda x, t: hi_f(x) - t, _zero_div))
    grad = lambda x: 0.5 * u.grad(x)
    interfaces = (_graph_interface("band-lower", domain, lo_f, grad),
                  _graph_interface("band-upper", domain, hi_f, grad))
    osc = M - m
    ext = (m - osc - 0.5, M + osc + 0.5)
    bound = _grid_bound(func, domain, (lo_f, hi_f, lambda x: np.full(len(x), ext[0]),
                                       lambda x: np.full(len(x), ext[1])))
    return PiecewiseField(func, n, bound, ext, regions, interfaces, name, params)


def _harmonic_cone(u, m, M, domain, name, params):
    n = domain.dim

    def func(x, t):
        uv, gu = u.value(x), u.grad(x)
        low = (m <= t) & (t <= uv)
        up = (uv < t) & (t <= M)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(low, (t - m) / (uv - m), np.where(up, (M - t) / (M - uv), 0.0))
        s = np.where(np.isfinite(s), s, 1.0)
        s = np.where(low | up, s, 0.0)
        return 2 * s[:, None] * gu, s * s * (gu * gu).sum(1)

    def div_low(x, t):
        return 2 * (t - m) / (u.value(x) - m) * u.laplacian(x)

    def div_up(x, t):
        return 2 * (M - t) / (M - u.value(x)) * u.laplacian(x)

    regions = (FieldRegion("lower-cone", lambda x, t: _stack(m - t, t - u.value(x)), div_low),
               FieldRegion("upper-cone", lambda x, t: _stack(u.value(x) - t, t - M), div_up),
               FieldRegion("below", lambda x, t: t - m, _zero_div),
               FieldRegion("above", lambda x, t: M - t, _zero_div))
    flat = lambda x: np.zeros((x.shape[0], n))
    interfaces = (_graph_interface("t=m", domain, lambda x: np.full(x.shape[0], m), flat),
                  _graph_interface("t=u", domain, u.value, u.grad),
                  _graph_interface("t=M", domain, lambda x: np.full(x.shape[0], M), flat))
    osc = M - m
    bound = _grid_bound(func, domain, (u.value,))
    return PiecewiseField(func, n, bound, (m - osc - 0.5, M + osc + 0.5), regions, interfaces, name, params)


def gradient_window(u, alpha):
    """Window ``|t - u(x)| < alpha / (4 |grad u(x)|)`` (unbounded where the gradient vanishes)."""

    def half(x):
        with np.errstate(divide="ignore"):
            return alpha / (4 * np.linalg.norm(u.grad(x), axis=1))

    return GraphWindow(lambda x: u.value(x) - half(x), lambda x: u.value(x) + half(x))


def calibration_harmonic(u, alpha, domain, window=False, variant="band", m=None, M=None):
    """Calibration of a harmonic ``u``: returns ``(U, phi)``.

    Without a window the oscillation condition ``osc u * sup |grad u| <= alpha``
    is required and ``phi`` is the band field (or, with ``variant="cone"``,
    the two-cone field).  With ``window=True`` the constant-in-t field
    ``(2 grad u, |grad u|^2)`` is returned on the gradient window.
    """
    _check_positive(alpha=alpha)
    params = {"alpha": alpha, "variant": variant, "window": window}
    if window:
        U = gradient_window(u, alpha)

        def func(x, t):
            gu = u.grad(x)
            return 2 * gu, (gu * gu).sum(1)

        lo, hi, _ = grid_extrema(u, domain)
        region = FieldRegion("all", lambda x, t: np.zeros((len(t), 0)), lambda x, t: 2 * u.laplacian(x))
        span = hi - lo + alpha
        bound = _grid_bound(func, domain, (u.value,))
        phi = PiecewiseField(func, domain.dim, bound, (lo - span, hi + span), (region,), (),
                             "harmonic-window", params)
        return U, phi
    holds, margin = check_condition_e1(u, alpha, domain)
    if not holds:
        raise ParameterError(f"osc(u) sup|grad u| <= alpha fails (margin {margin:.4g}); use window=True")
    if m is None or M is None:
        lo, hi, slack = grid_extrema(u, domain)
        m = lo - slack if m is None else m
        M = hi + slack if M is None else M
    params.update(m=m, M=M)
    if variant == "band":
        return GraphWindow.whole(), _harmonic_band(u, m, M, domain, "harmonic-band", params)
    if variant == "cone":
        return GraphWindow.whole(), _harmonic_cone(u, m, M, domain, "harmonic-cone", params)
    raise ConfigurationError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# pure jump in a cylinder


def pure_jump_function(c, a, h, V=(0.0, 1.0)):
    dom = RectangleDomain(0.0, a, V[0], V[1])
    pieces = ((Box((0.0, V[0]), (c, V[1])), Constant(0.0)), (Box((c, V[0]), (a, V[1])), Constant(h)))
    jump = JumpSegment((c, V[0]), (c, V[1]), Constant(0.0), Constant(h), (1.0, 0.0))
    return SbvFunction(dom, pieces, (jump,))


def calibration_pure_jump(c, a, h, alpha, V=(0.0, 1.0), variant="band"):
    """Product field: the one-dimensional band (or cone) field in ``(x1, t)`` with ``lam = sqrt(alpha / a)``.

    Requires ``a alpha <= h^2``.
    """
    _check_positive(a=a, h=h, alpha=alpha)
    if not 0 < c < a:
        raise ParameterError("need 0 < c < a")
    if a * alpha > h * h:
        raise ParameterError(f"pure-jump calibration needs a alpha <= h^2 ({a * alpha:.4g} > {h * h:.4g})")
    lam = math.sqrt(alpha / a)
    dom = RectangleDomain(0.0, a, V[0], V[1])
    build = _band_field if variant == "band" else _cone_field
    phi = build(lam, a, dom, f"pure-jump-{variant}")
    phi.params.update(c=c, h=h, alpha=alpha)
    return phi


# ---------------------------------------------------------------------------
# triple junction

E_PLUS = np.array([math.sqrt(3) / 2, -0.5])
E_MINUS = np.array([-math.sqrt(3) / 2, -0.5])


def _rotation(th):
    c, s = math.cos(th), math.sin(th)
    return np.array([[c, -s], [s, c]])


def normalize_triple(a, b, c):
    """Orthogonal ``Q`` and shift so that ``u(x) = u'(Q x) + shift`` with ``u'`` taking values ``A < 0 < C``.

    Returns ``(Q, shift, (A, 0, C))``.
    """
    vals = np.array([a, b, c], float)
    k = int(np.argsort(vals)[1])
    shift = float(vals[k])
    Q = _rotation((1 - k) * 2 * math.pi / 3)
    nv = [float(vals[(j + k - 1) % 3] - shift) for j in range(3)]
    if nv[0] > nv[2]:
        Q = np.diag([1.0, -1.0]) @ Q
        nv = [nv[2], nv[1], nv[0]]
    return Q, shift, tuple(nv)


def triple_junction_function(r, a, b, c, center=(0.0, 0.0)):
    return sector_constant(DiskDomain(tuple(center), r), (a, b, c))


def calibration_triple_junction(alpha, r, a, b, c, lam=None, center=(0.0, 0.0)):
    """Two-band field for three sectors meeting at 120 degrees in the disk ``B(center, r)``.

    Requires ``2 alpha r <= min |difference|^2``.  Values are normalized
    internally by a rotation, a reflection and a shift in ``t``.
    """
    _check_positive(alpha=alpha, r=r)
    if len({a, b, c}) < 3:
        raise ParameterError("the three values must be distinct")
    if 2 * alpha * r > min((a - b) ** 2, (b - c) ** 2, (c - a) ** 2):
        raise ParameterError("triple junction needs 2 alpha r <= min squared difference")
    Q, shift, (A, _, C) = normalize_triple(a, b, c)
    lam = math.sqrt(2 * alpha / r) if lam is None else lam
    _check_positive(lam=lam)
    if lam * r / 2 + alpha / lam > min(-A, C) + 1e-12:
        raise ParameterError(f"no feasible lambda: lam r / 2 + alpha / lam = {lam * r / 2 + alpha / lam:.4g} "
                             f"> {min(-A, C):.4g}")
    cen = np.asarray(center, float)
    w = alpha / lam
    qp, qm = Q.T @ E_PLUS, Q.T @ E_MINUS  # e_pm pulled back to original coordinates

    def xp(x):
        return (x - cen) @ Q.T

    pl = lambda x: shift + lam / 4 * (r + xp(x) @ E_PLUS)
    mu = lambda x: shift + lam / 4 * (-r + xp(x) @ E_MINUS)

    def func(x, t):
        bp = (pl(x) <= t) & (t <= pl(x) + w)
        bm = (mu(x) - w <= t) & (t <= mu(x))
        px = np.where(bp[:, None], lam * qp, np.where(bm[:, None], lam * qm, 0.0))
        return px, np.where(bp | bm, lam * lam / 4, 0.0)

    regions = (FieldRegion("band+", lambda x, t: _stack(pl(x) - t, t - pl(x) - w), _zero_div),
               FieldRegion("band-", lambda x, t: _stack(mu(x) - w - t, t - mu(x)), _zero_div),
               FieldRegion("between", lambda x, t: _stack(mu(x) - t, t - pl(x)), _zero_div),
               FieldRegion("below", lambda x, t: t - mu(x) + w, _zero_div),
               FieldRegion("above", lambda x, t: pl(x) + w - t, _zero_div))
    dom = DiskDomain(tuple(center), r)
    gp = lambda x: np.tile(lam / 4 * qp, (x.shape[0], 1))
    gm = lambda x: np.tile(lam / 4 * qm, (x.shape[0], 1))
    interfaces = (_graph_interface("band+ lower", dom, pl, gp),
                  _graph_interface("band+ upper", dom, lambda x: pl(x) + w, gp),
                  _graph_interface("band- lower", dom, lambda x: mu(x) - w, gm),
                  _graph_interface("band- upper", dom, mu, gm))
    lo, hi = min(a, b, c), max(a, b, c)
    return PiecewiseField(func, 2, lam * math.hypot(1, lam / 4), (lo - 1.0, hi + 1.0), regions, interfaces,
                          "triple-junction", {"alpha": alpha, "r": r, "a": a, "b": b, "c": c, "lambda": lam})


# ---------------------------------------------------------------------------
# solution of the Neumann problem


def calibration_neumann_solution(u, g, beta, domain, alpha=None, window=False, m=None, M=None,
                                 residual_tol=1e-6):
    """Three-branch Neumann calibration for the solution of ``Delta u = beta (u - g)``.

    ``u`` is a :class:`NeumannSolution` (its cosine-series interpolant is
    used) or an analytic expression; ``g`` is a callable on points.
    Returns ``(U, phi, expr)`` where ``expr`` is the smooth representative of ``u``.
    """
    _check_positive(beta=beta)
    if isinstance(u, NeumannSolution):
        if u.residual > residual_tol:
            raise ParameterError(f"discrete residual {u.residual:.3e} exceeds {residual_tol}")
        expr = u.interpolant()
    else:
        expr = u
        P = domain.grid(65)
        res = float(np.max(np.abs(expr.laplacian(P) - beta * (expr.value(P) - g(P)))))
        if res > residual_tol:
            raise ParameterError(f"u does not solve the Neumann problem (residual {res:.3e})")
    params = {"beta": beta, "alpha": alpha, "window": window}
    if window:
        if alpha is None:
            raise ConfigurationError("the windowed field needs alpha")
        U = gradient_window(expr, alpha)

        def func(x, t):
            uv, gu, gv = expr.value(x), expr.grad(x), g(x)
            return 2 * gu, (gu * gu).sum(1) - beta * (t - gv) ** 2 + beta * (t - uv) ** 2

        region = FieldRegion("all", lambda x, t: np.zeros((len(t), 0)),
                             lambda x, t: 2 * expr.laplacian(x) + 2 * beta * (g(x) - expr.value(x)))
        lo, hi, _ = grid_extrema(expr, domain)
        span = hi - lo + alpha
        ext = (lo - span, hi + span)
        bound = _grid_bound(func, domain, (lambda x: np.full(len(x), ext[0]), lambda x: np.full(len(x), ext[1])))
        phi = PiecewiseField(func, domain.dim, bound, ext, (region,), (), "neumann-window", params)
        phi.params["numeric"] = True
        return U, phi, expr
    if alpha is not None:
        holds, margin = check_condition_e1(expr, alpha, domain)
        if not holds:
            raise ParameterError(f"osc(u) sup|grad u| <= alpha fails (margin {margin:.4g}); use window=True")
    if m is None or M is None:
        lo, hi, slack = grid_extrema(expr, domain)
        m = lo - slack if m is None else m
        M = hi + slack if M is None else M
    params.update(m=m, M=M)
    phi = _harmonic_band(expr, m, M, domain, "neumann", params, beta=beta, g=g)
    # the band must reach the datum's range so that sampling covers every t where (a1) matters
    G = g(domain.grid(65))
    lo_t = min(float(G.min()), m) - 0.5
    hi_t = max(float(G.max()), M) + 0.5
    phi = PiecewiseField(phi.func, phi.dim, phi.bound, (lo_t, hi_t), phi.regions, phi.interfaces,
                         phi.name, {**phi.params, "numeric": True})
    return GraphWindow.whole(), phi, expr


# ---------------------------------------------------------------------------
# datum with two values


def cosine_bump(alpha, lo, hi):
    """``sigma(t) = (alpha / L) (1 - cos(2 pi (t - lo) / L))`` on ``(lo, hi)`` and its primitive."""
    L = hi - lo

    def sigma(t):
        s = (np.asarray(t, float) - lo) / L
        return np.where((s > 0) & (s < 1), alpha / L * (1 - np.cos(2 * math.pi * s)), 0.0)

    def prim(t):
        s = np.clip((np.asarray(t, float) - lo) / L, 0.0, 1.0)
        return alpha * (s - np.sin(2 * math.pi * s) / (2 * math.pi))

    return sigma, prim


@dataclass(frozen=True)
class RadialTaper:
    """``v(x) = eta(|x - c|) (x - c) / |x - c|`` with ``eta = cos^2`` ramps of half-width ``w`` around ``R``."""

    center: tuple
    R: float
    w: float

    def _rho(self, x):
        d = as_points(x, 2) - np.asarray(self.center)
        return d, np.hypot(d[:, 0], d[:, 1])

    def eta(self, rho):
        z = (rho - self.R) / self.w
        return np.where(np.abs(z) < 1, np.cos(0.5 * math.pi * z) ** 2, 0.0)

    def deta(self, rho):
        z = (rho - self.R) / self.w
        return np.where(np.abs(z) < 1, -(math.pi / (2 * self.w)) * np.sin(math.pi * z), 0.0)

    def __call__(self, x):
        d, rho = self._rho(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(rho[:, None] > 0, d / rho[:, None], 0.0)
        return self.eta(rho)[:, None] * unit

    def div(self, x):
        _, rho = self._rho(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(rho > 0, self.eta(rho) / rho, 0.0)
        return self.deta(rho) + q

    def radii(self):
        return (self.R - self.w, self.R, self.R + self.w)


def _interval_gates(q, lo, hi):
    cols = []
    if lo is not None:
        cols.append(lo - q)
    if hi is not None:
        cols.append(q - hi)
    return cols


@dataclass
class TwoValuesCalibration:
    field: PiecewiseField
    u: SbvFunction
    g: Callable
    beta0: float
    sigma: Callable
    v: Callable


def two_values_datum(center, R, a, b):
    cen = np.asarray(center, float)

    def g(x):
        d = as_points(x, 2) - cen
        return np.where((d * d).sum(1) < R * R, float(a), float(b))

    return g


def two_values_function(domain, center, R, a, b):
    lo, hi = (a, b) if a < b else (b, a)
    pieces = ((Sector(tuple(center), 0.0, R, 0.0, 2 * math.pi), Constant(a)),
              (Box(domain.lo, domain.hi, ((center[0], center[1], R),)), Constant(b)))
    arc = JumpArc(tuple(center), R, 0.0, 2 * math.pi, Constant(lo), Constant(hi), outward=b > a)
    return SbvFunction(domain, pieces, (arc,))


def estimate_beta0(phi, g, domain, t_lo, t_hi, n_x=20_000, n_t=241, seed=0):
    """Smallest beta for which ``phi_t + beta (t - g)^2 >= |phi_x|^2 / 4`` holds on a dense sample."""
    rng = np.random.default_rng(seed)
    x = domain.sample(n_x, rng)
    ts = np.linspace(t_lo, t_hi, n_t)
    best = 0.0
    for t in ts:
        T = np.full(len(x), t)
        px, pt = phi(x, T)
        d2 = (T - g(x)) ** 2
        need = 0.25 * (px * px).sum(1) - pt
        ok = d2 > 1e-14
        if np.any(need[~ok] > 1e-12):
            return math.inf
        if ok.any():
            best = max(best, float(np.max(need[ok] / d2[ok])))
    return best


def calibration_two_values(domain=None, center=(0.0, 0.0), R=0.5, a=0.0, b=1.0, alpha=0.1,
                           sigma=None, sigma_primitive=None, v=None, support=None, check_samples=256):
    """Calibration for ``u = g`` where ``g`` takes value ``a`` on the disk ``E = B(center, R)`` and ``b`` outside.

    ``phi_x = sigma(t) v(x)`` and ``phi_t = -div v(x) (S(t) - S(g(x)))`` with
    ``S`` the primitive of ``sigma``.  ``v`` must carry a ``div`` method.
    When ``a > b`` the field for ``(-a, -b)`` is reflected in ``t``.
    Also returns an estimate of the threshold ``beta0``.
    """
    domain = domain or RectangleDomain(-1.0, 1.0, -1.0, 1.0)
    _check_positive(alpha=alpha, R=R)
    if a == b:
        raise ParameterError("the two values must differ")
    flip = a > b
    A, B = (-a, -b) if flip else (a, b)
    L = B - A
    if support is None:
        support = (A + L / 3, A + 2 * L / 3)
    s0, s1 = support
    if not (A < s0 < s1 < B):
        raise ParameterError("support of sigma must lie inside (a, b)")
    if sigma is None:
        sigma, sigma_primitive = cosine_bump(alpha, s0, s1)
    total = quad(lambda s: float(sigma(np.array([s]))[0]), s0, s1, limit=200, epsabs=1e-13, epsrel=1e-13)[0]
    if abs(total - alpha) > 1e-8:
        raise ParameterError(f"integral of sigma is {total:.12g}, expected alpha = {alpha}")
    if sigma_primitive is None:
        grid = np.linspace(s0, s1, 20_001)
        vals = sigma(grid)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])
        sigma_primitive = lambda t: np.interp(t, grid, cum)
    v = v or RadialTaper(tuple(center), R, min(0.25, 0.5 * R))
    th = 2 * math.pi * (np.arange(check_samples) + 0.5) / check_samples
    nrm = np.stack([np.cos(th), np.sin(th)], 1)
    on = np.asarray(center) + R * nrm
    if np.max(np.linalg.norm(v(on) - nrm, axis=1)) > 1e-8:
        raise ParameterError("v is not the outer unit normal on the boundary of E")
    probe = domain.grid(101)
    if np.max(np.linalg.norm(v(probe), axis=1)) > 1 + 1e-12:
        raise ParameterError("|v| must not exceed 1")
    g = two_values_datum(center, R, a, b)
    Sg = lambda x: sigma_primitive(np.where(g(x) == a, A, B))

    def func(x, t):
        tp = -t if flip else t
        px = sigma(tp)[:, None] * v(x)
        pt = -v.div(x) * (sigma_primitive(tp) - Sg(x))
        return (-px if flip else px), pt

    cen = np.asarray(center, float)
    rho = lambda x: np.hypot(x[:, 0] - cen[0], x[:, 1] - cen[1])
    tq = lambda t: -t if flip else t
    radii = getattr(v, "radii", lambda: (R,))()
    r_edges = [None, *sorted(radii), None]
    t_edges = [None, s0, s1, None]
    regions = []
    for i in range(len(r_edges) - 1):
        for j in range(len(t_edges) - 1):
            rl, rh, tl, thh = r_edges[i], r_edges[i + 1], t_edges[j], t_edges[j + 1]

            def gates(x, t, rl=rl, rh=rh, tl=tl, thh=thh):
                cols = _interval_gates(rho(x), rl, rh) + _interval_gates(tq(t), tl, thh)
                return np.stack(cols, 1)

            regions.append(FieldRegion(f"r{i}t{j}", gates))

    def sampler(k, rng):
        ang = 2 * math.pi * rng.random(k)
        x = cen + R * np.stack([np.cos(ang), np.sin(ang)], 1)
        return x, t_lo + (t_hi - t_lo) * rng.random(k)

    def normal(x, t):
        d = _unit_rows(as_points(x, 2) - cen)
        return np.concatenate([d, np.zeros((len(d), 1))], 1)

    lo, hi = min(a, b), max(a, b)
    t_lo, t_hi = lo - 0.5 * L, hi + 0.5 * L
    smax = float(np.max(sigma(np.linspace(s0, s1, 1001))))
    phi = PiecewiseField(func, 2, math.hypot(smax, alpha * 10), (t_lo, t_hi), tuple(regions),
                         (Interface("boundary of E", sampler, normal),), "two-values",
                         {"alpha": alpha, "a": a, "b": b, "R": R, "numeric": True})
    beta0 = estimate_beta0(phi, g, domain, t_lo, t_hi)
    u = two_values_function(domain, center, R, a, b)
    return TwoValuesCalibration(phi, u, g, beta0, sigma, v)


# ---------------------------------------------------------------------------
# named bundles for the command line


@dataclass
class ExampleBundle:
    id: str
    params: dict
    domain: object
    u: SbvFunction
    window: GraphWindow
    field: PiecewiseField
    ms: MsParams
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"schema": 1, "example": self.id, "params": self.params, "u": self.u.to_dict(),
                "field": self.field.name, "extra": self.extra}


def _affine_u(lam, a):
    dom = IntervalDomain(a)
    return SbvFunction(dom, ((Span(0.0, a), Affine(0.0, (lam,))),))


def _harmonic_u(coef, domain):
    return SbvFunction(domain, ((Box(domain.lo, domain.hi), HarmonicPolynomial(a=coef)),))


def _p(params, key, default):
    return float(params.get(key, default))


def build_example(eid, **params):
    """Assemble ``(u, phi, U, MsParams)`` for a named example with optional parameter overrides."""
    P = dict(params)
    if eid in ("affine-constant", "affine-cone", "affine-window"):
        lam, a, alpha = _p(P, "lambda", 1.0), _p(P, "a", 1.0), _p(P, "alpha", 1.0)
        u = _affine_u(lam, a)
        if eid == "affine-window":
            U, phi = calibration_affine_window(lam, a, alpha)
        else:
            U = GraphWindow.whole()
            phi = (calibration_affine_constant if eid == "affine-constant" else calibration_affine_cone)(lam, a)
        used = {"lambda": lam, "a": a, "alpha": alpha}
        return ExampleBundle(eid, used, u.domain, u, U, phi, MsParams(alpha))
    if eid in ("jump-constant", "jump-cone", "jump-window"):
        a, c, h, alpha = _p(P, "a", 1.0), _p(P, "c", 0.5), _p(P, "h", 1.2), _p(P, "alpha", 1.0)
        dom = IntervalDomain(a)
        u = piecewise_constant_1d(dom, [c], [0.0, h])
        used = {"a": a, "c": c, "h": h, "alpha": alpha}
        if eid == "jump-window":
            eps = _p(P, "eps", 0.1)
            lam = P.get("lambda")
            U, phi = calibration_jump_window(c, a, h, alpha, eps, None if lam is None else float(lam))
            used.update(eps=eps, **({"lambda": float(lam)} if lam is not None else {}))
        else:
            lam = math.sqrt(alpha / a)
            U = GraphWindow.whole()
            phi = (calibration_affine_constant if eid == "jump-constant" else calibration_affine_cone)(lam, a)
        return ExampleBundle(eid, used, dom, u, U, phi, MsParams(alpha))
    if eid in ("harmonic", "harmonic-cone", "harmonic-window"):
        coef, alpha = _p(P, "coef", 0.3), _p(P, "alpha", 1.0)
        dom = RectangleDomain(-1.0, 1.0, -1.0, 1.0)
        u = _harmonic_u(coef, dom)
        expr = u.pieces[0][1]
        U, phi = calibration_harmonic(expr, alpha, dom, window=eid == "harmonic-window",
                                      variant="cone" if eid == "harmonic-cone" else "band")
        return ExampleBundle(eid, {"coef": coef, "alpha": alpha}, dom, u, U, phi, MsParams(alpha))
    if eid in ("pure-jump", "pure-jump-cone"):
        a, c, h, alpha, b = (_p(P, "a", 1.0), _p(P, "c", 0.5), _p(P, "h", 1.2), _p(P, "alpha", 1.0),
                             _p(P, "b", 1.0))
        u = pure_jump_function(c, a, h, (0.0, b))
        phi = calibration_pure_jump(c, a, h, alpha, (0.0, b), "cone" if eid.endswith("cone") else "band")
        return ExampleBundle(eid, {"a": a, "c": c, "h": h, "alpha": alpha, "b": b}, u.domain, u,
                             GraphWindow.whole(), phi, MsParams(alpha))
    if eid == "triple-junction":
        alpha, r = _p(P, "alpha", 1.0), _p(P, "r", 1.0)
        a, b, c = _p(P, "a", -2.0), _p(P, "b", 0.0), _p(P, "c", 2.0)
        u = triple_junction_function(r, a, b, c)
        phi = calibration_triple_junction(alpha, r, a, b, c)
        return ExampleBundle(eid, {"alpha": alpha, "r": r, "a": a, "b": b, "c": c}, u.domain, u,
                             GraphWindow.whole(), phi, MsParams(alpha))
    if eid in ("neumann", "neumann-window"):
        n, beta, alpha = int(P.get("n", 65)), _p(P, "beta", 1.0), _p(P, "alpha", 1.0)
        freq = _p(P, "freq", 1.0)
        dom = RectangleDomain(0.0, 1.0, 0.0, 1.0)
        g = lambda x: np.cos(freq * math.pi * as_points(x, 2)[:, 0])
        sol = solve_neumann(g, beta, dom, shape=(n, n), order=4)
        U, phi, expr = calibration_neumann_solution(sol, g, beta, dom, alpha, window=eid == "neumann-window")
        u = SbvFunction(dom, ((Box(dom.lo, dom.hi), expr),))
        return ExampleBundle(eid, {"n": n, "beta": beta, "alpha": alpha, "freq": freq}, dom, u, U, phi,
                             MsParams(alpha, beta, g), {"residual": sol.residual})
    if eid == "two-values":
        alpha, a, b, R = _p(P, "alpha", 0.1), _p(P, "a", 0.0), _p(P, "b", 1.0), _p(P, "R", 0.5)
        dom = RectangleDomain(-1.0, 1.0, -1.0, 1.0)
        cal = calibration_two_values(dom, (0.0, 0.0), R, a, b, alpha)
        factor = _p(P, "beta_factor", 2.0)
        beta = float(P["beta"]) if "beta" in P else factor * cal.beta0
        return ExampleBundle(eid, {"alpha": alpha, "a": a, "b": b, "R": R, "beta": beta}, dom, cal.u,
                             GraphWindow.whole(), cal.field, MsParams(alpha, beta, cal.g), {"beta0": cal.beta0})
    raise ConfigurationError(f"unknown example {eid!r}; choose from {', '.join(EXAMPLE_IDS)}")


EXAMPLE_IDS = ("affine-constant", "affine-cone", "affine-window", "jump-constant", "jump-cone", "jump-window",
               "harmonic", "harmonic-cone", "harmonic-window", "pure-jump", "pure-jump-cone", "triple-junction",
               "neumann", "neumann-window", "two-values")
