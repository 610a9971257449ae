"""Checkers for the calibration conditions of candidate vector fields.

Every checker returns a :class:`ConditionResult`.  Inequality conditions
(a1, b1) report the smallest slack; equality-type conditions (a2, b2, c1,
c2, interface continuity, box flux) report the largest deviation, stored
as a negative slack so that ``passed == (worst_margin >= -tolerance)``
holds uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .expr import as_points
from .quadrature import _gates_fn, integrate_lines, integrate_rect, line_roots, vertical_integrals

TOL_ANALYTIC = 1e-9
TOL_NUMERIC = 1e-6

MS_CONDITIONS = ("a1", "a2", "b1", "b2", "c1")


@dataclass(frozen=True)
class SamplePlan:
    n_x: int = 256
    n_t: int = 64
    n_jump: int = 100
    n_interface: int = 400
    seed: int = 0
    tol_analytic: float = TOL_ANALYTIC
    tol_numeric: float = TOL_NUMERIC

    def rng(self, salt=0):
        return np.random.default_rng([self.seed, salt])


@dataclass
class ConditionResult:
    condition: str
    passed: bool
    worst_margin: float
    witness: Optional[tuple]
    samples_used: int
    kind: str = "inequality"
    tolerance: float = TOL_ANALYTIC
    skipped: int = 0
    note: str = ""

    @property
    def margin(self):
        """Slack for inequalities, deviation for equality-type conditions."""
        if self.kind == "inequality" or math.isinf(self.worst_margin):
            return self.worst_margin
        return -self.worst_margin

    def to_dict(self):
        return {"condition": self.condition, "passed": bool(self.passed),
                "margin": _jsonable(self.margin), "worst_margin": _jsonable(self.worst_margin),
                "kind": self.kind, "tolerance": self.tolerance,
                "witness": _jsonable(self.witness), "samples_used": int(self.samples_used),
                "skipped": int(self.skipped), "note": self.note}


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, np.floating):
        return _jsonable(float(v))
    return v


def _inequality(cond, slack, witnesses, tol, skipped=0, note=""):
    slack = np.asarray(slack, float)
    if slack.size == 0:
        return ConditionResult(cond, True, math.inf, None, 0, "inequality", tol, skipped, note or "vacuous")
    i = int(np.argmin(slack))
    m = float(slack[i])
    return ConditionResult(cond, m >= -tol, m, _jsonable(witnesses[i]), slack.size, "inequality", tol, skipped, note)


def _equality(cond, deviation, witnesses, tol, skipped=0, note=""):
    dev = np.asarray(deviation, float)
    if dev.size == 0:
        return ConditionResult(cond, True, math.inf, None, 0, "equality", tol, skipped, note or "vacuous")
    i = int(np.argmax(dev))
    m = float(dev[i])
    return ConditionResult(cond, m <= tol, -m, _jsonable(witnesses[i]), dev.size, "equality", tol, skipped, note)


def _tol(phi, plan, numeric=False):
    return plan.tol_numeric if (numeric or phi.params.get("numeric")) else plan.tol_analytic


def sample_xt(phi, U, domain, plan, salt=0, with_roots=True):
    """Points ``(x, t)`` in the window: ``n_t`` stratified levels per sampled x plus interface crossings."""
    rng = plan.rng(salt)
    x = domain.sample(plan.n_x, rng)
    lo, hi = phi.t_range(x, U)
    ok = hi > lo
    x, lo, hi = x[ok], lo[ok], hi[ok]
    frac = (np.arange(plan.n_t) + 0.5) / plan.n_t
    T = lo[:, None] + frac[None, :] * (hi - lo)[:, None]
    X = np.repeat(x, plan.n_t, axis=0)
    T = T.ravel()
    if with_roots and phi.regions:
        p0 = np.concatenate([x, lo[:, None]], 1)
        p1 = np.concatenate([x, hi[:, None]], 1)
        li, s = line_roots(_gates_fn(phi), p0, p1)
        X = np.concatenate([X, x[li]])
        T = np.concatenate([T, lo[li] + s * (hi - lo)[li]])
    inside = U.contains(X, T)
    return X[inside], T[inside]


def check_a1_ms(phi, U, p, domain, plan=None):
    """``phi_t + beta |t - g|^2 - |phi_x|^2 / 4 >= 0`` at sampled points of the window."""
    plan = plan or SamplePlan()
    X, T = sample_xt(phi, U, domain, plan, salt=1)
    px, pt = phi(X, T)
    slack = pt + p.beta * (T - p.datum(X)) ** 2 - 0.25 * (px * px).sum(1)
    wit = [(X[i].tolist(), float(T[i])) for i in range(len(T))]
    return _inequality("a1", slack, wit, _tol(phi, plan))


def _graph_samples(u, domain, plan, salt):
    rng = plan.rng(salt)
    x = domain.sample(plan.n_x, rng)
    if u.jumps:
        dist = np.min([j.distance(x) for j in u.jumps], axis=0)
        x = x[dist > 1e-9]
    v = u.value(x)
    ok = np.isfinite(v)
    return x[ok], v[ok], u.grad(x[ok])


def check_a2_ms(phi, u, p, U, domain, plan=None):
    """Deviation of ``phi`` on the graph of ``u`` from ``(2 grad u, |grad u|^2 - beta |u - g|^2)``."""
    plan = plan or SamplePlan()
    x, v, gu = _graph_samples(u, domain, plan, salt=2)
    if not np.all(U.contains(x, v)):
        raise PreconditionError("graph of u leaves the window U")
    px, pt = phi(x, v)
    d1 = np.linalg.norm(px - 2 * gu, axis=1)
    d2 = np.abs(pt - ((gu * gu).sum(1) - p.beta * (v - p.datum(x)) ** 2))
    dev = np.maximum(d1, d2)
    wit = [(x[i].tolist(), float(v[i])) for i in range(len(v))]
    return _equality("a2", dev, wit, _tol(phi, plan))


def _max_pair_diff(c):
    """Largest ``|c_j - c_i|`` over rows of ``c`` (q, n) and the maximizing pair."""
    if c.shape[1] == 1:
        i, j = int(np.argmin(c[:, 0])), int(np.argmax(c[:, 0]))
        return abs(float(c[j, 0] - c[i, 0])), (min(i, j), max(i, j))
    d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    return float(d[i, j]), (min(i, j), max(i, j))


def cumulative_t_integrals(phi, U, domain, plan, salt):
    rng = plan.rng(salt)
    x = domain.sample(plan.n_x, rng)
    lo, hi = phi.t_range(x, U)
    ok = hi > lo
    x, lo, hi = x[ok], lo[ok], hi[ok]
    levels = np.linspace(0.0, 1.0, plan.n_t)
    cums, knots = vertical_integrals(phi, x, lo, hi, "x", levels=levels)
    return x, cums, knots


def check_b1_ms(phi, U, alpha, domain, plan=None):
    """``alpha - |int_{t1}^{t2} phi_x dt| >= 0`` over all level pairs per sampled x."""
    plan = plan or SamplePlan()
    x, cums, knots = cumulative_t_integrals(phi, U, domain, plan, salt=3)
    slack, wit = [], []
    for xi, c, kn in zip(x, cums, knots):
        d, (i, j) = _max_pair_diff(c)
        slack.append(alpha - d)
        wit.append((xi.tolist(), float(kn[i]), float(kn[j])))
    return _inequality("b1", slack, wit, plan.tol_numeric)


def check_b2_ms(phi, u, alpha, U=None, plan=None):
    """Deviation of ``int_{u-}^{u+} phi_x dt`` from ``alpha nu_u`` on the jump set."""
    plan = plan or SamplePlan()
    if not u.jumps:
        return ConditionResult("b2", True, math.inf, None, 0, "equality", plan.tol_numeric, note="vacuous: no jumps")
    devs, wits = [], []
    for P, _, nrm, lo, hi in u.jump_quadrature(plan.n_jump):
        if U is not None and not (np.all(U.lower(P) < lo) and np.all(hi < U.upper(P))):
            raise PreconditionError("jump part of the graph leaves the window U")
        integral = vertical_integrals(phi, P, lo, hi, "x")
        devs.append(np.linalg.norm(integral - alpha * nrm, axis=1))
        wits += [(P[i].tolist(), float(lo[i]), float(hi[i])) for i in range(len(P))]
    return _equality("b2", np.concatenate(devs), wits, plan.tol_numeric)


def _fd_divergence(phi, X, T, h):
    n = phi.dim
    div = np.zeros(len(T))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        div += (phi(X + e, T)[0][:, i] - phi(X - e, T)[0][:, i]) / (2 * h)
    div += (phi(X, T + h)[1] - phi(X, T - h)[1]) / (2 * h)
    return div


def _stencil_inside(region, X, T, h):
    n = X.shape[1]
    ok = region.contains(X, T)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        ok &= region.contains(X + e, T) & region.contains(X - e, T)
    ok &= region.contains(X, T + h) & region.contains(X, T - h)
    return ok


def check_c1_divergence(phi, U, domain, plan=None, use_declared=True):
    """Largest pointwise ``|div phi|`` over interior samples of every region."""
    plan = plan or SamplePlan()
    X, T = sample_xt(phi, U, domain, plan, salt=4, with_roots=False)
    lo, hi = phi.t_extent
    h = 1e-5 * max(domain.diam, hi - lo)
    if not phi.regions:
        div = _fd_divergence(phi, X, T, h)
        wit = [(X[i].tolist(), float(T[i])) for i in range(len(T))]
        return _equality("c1", np.abs(div), wit, plan.tol_numeric, note="finite differences")
    covered = np.zeros(len(T), bool)
    devs, wits = [], []
    numeric = False
    for region in phi.regions:
        if use_declared and region.divergence is not None:
            m = region.contains(X, T) & ~covered
            if m.any():
                devs.append(np.abs(np.asarray(region.divergence(X[m], T[m]), float)))
        else:
            numeric = True
            m = _stencil_inside(region, X, T, h) & ~covered
            if m.any():
                devs.append(np.abs(_fd_divergence(phi, X[m], T[m], h)))
        covered |= m
        wits += [(X[i].tolist(), float(T[i])) for i in np.nonzero(m)[0]]
    dev = np.concatenate(devs) if devs else np.zeros(0)
    skipped = int((~covered).sum())
    return _equality("c1", dev, wits, _tol(phi, plan, numeric), skipped=skipped)


def _in_window(phi, U, domain, X, T):
    lo, hi = phi.t_extent
    return domain.contains(X) & U.contains(X, T) & (T > lo) & (T < hi)


def _one_sided_limit(f, delta):
    # quadratic extrapolation from offsets delta, 2 delta, 3 delta
    return 3 * f(delta) - 3 * f(2 * delta) + f(3 * delta)


def check_interface_continuity(phi, U, domain, plan=None):
    """Jump of the normal component of ``phi`` across every declared interface."""
    plan = plan or SamplePlan()
    rng = plan.rng(5)
    delta = 1e-6 * domain.diam
    n = phi.dim
    devs, wits = [], []
    for itf in phi.interfaces:
        X, T = itf.sampler(plan.n_interface, rng)
        X = as_points(X, n)
        keep = _in_window(phi, U, domain, X, T)
        X, T = X[keep], np.asarray(T, float)[keep]
        if not len(T):
            continue
        N = np.asarray(itf.normal(X, T), float)

        def flux_at(s):
            px, pt = phi(X + s * N[:, :n], T + s * N[:, n])
            return (px * N[:, :n]).sum(1) + pt * N[:, n]

        plus = _one_sided_limit(flux_at, delta)
        minus = _one_sided_limit(flux_at, -delta)
        devs.append(np.abs(plus - minus))
        wits += [(X[i].tolist(), float(T[i]), itf.name) for i in range(len(T))]
    if not devs:
        return ConditionResult("interface-continuity", True, math.inf, None, 0, "equality",
                               plan.tol_numeric, note="suspicious: no interface samples inside the window")
    return _equality("interface-continuity", np.concatenate(devs), wits, plan.tol_numeric)


def box_flux(phi, box_lo, box_hi):
    """Outward flux of ``phi`` through the boundary of an axis-aligned box in (x, t) and the box surface area."""
    n = phi.dim
    d = n + 1
    lo, hi = np.asarray(box_lo, float), np.asarray(box_hi, float)
    gate_fn = _gates_fn(phi) if phi.regions else None

    def comp(P, k):
        px, pt = phi(P[:, :n], P[:, n])
        return px[:, k] if k < n else pt

    total, area = 0.0, 0.0
    for k in range(d):
        others = [i for i in range(d) if i != k]
        for side, sign in ((lo[k], -1.0), (hi[k], 1.0)):
            if d == 2:
                o = others[0]
                p0 = lo.copy()
                p0[k] = side
                p1 = p0.copy()
                p1[o] = hi[o]
                val = integrate_lines(lambda P: comp(P, k)[:, None], p0[None], p1[None], gate_fn,
                                      panels=8)[0, 0]
                area += hi[o] - lo[o]
            else:
                o1, o2 = others
                origin = lo.copy()
                origin[k] = side
                e1 = np.zeros(d)
                e1[o1] = 1.0
                e2 = np.zeros(d)
                e2[o2] = 1.0
                val = integrate_rect(lambda P: comp(P, k), gate_fn, origin, e1, e2,
                                     hi[o1] - lo[o1], hi[o2] - lo[o2])
                area += (hi[o1] - lo[o1]) * (hi[o2] - lo[o2])
            total += sign * val
    return total, area


def _box_in_window(U, lo, hi, n):
    if U.is_whole:
        return True
    k = 9
    if n == 1:
        xs = np.linspace(lo[0], hi[0], 33)[:, None]
    else:
        a = np.linspace(lo[0], hi[0], k)
        b = np.linspace(lo[1], hi[1], k)
        A, B = np.meshgrid(a, b, indexing="ij")
        xs = np.stack([A.ravel(), B.ravel()], 1)
    return bool(np.all(U.lower(xs) < lo[n]) and np.all(hi[n] < U.upper(xs)))


def check_box_flux(phi, U, boxes, tol=TOL_NUMERIC):
    """Largest normalized boundary flux ``|flux| / area`` over the given boxes."""
    devs, wits = [], []
    for lo, hi in boxes:
        if not _box_in_window(U, np.asarray(lo, float), np.asarray(hi, float), phi.dim):
            raise PreconditionError("box is not contained in the window U")
        f, area = box_flux(phi, lo, hi)
        devs.append(abs(f) / area)
        wits.append((list(map(float, lo)), list(map(float, hi))))
    return _equality("box-flux", devs, wits, tol)


def random_boxes(phi, U, domain, count, rng, size=0.25, max_tries=2000):
    """Random axis-aligned boxes inside ``Omega x R`` and the window."""
    n = phi.dim
    lo_t, hi_t = phi.t_extent
    boxes = []
    tries = 0
    while len(boxes) < count and tries < max_tries:
        tries += 1
        c = domain.sample(1, rng)[0]
        half = 0.5 * size * domain.diam * (0.3 + 0.7 * rng.random(n))
        xlo, xhi = c - half, c + half
        if not (np.all(domain.contains(np.array([xlo]))) and np.all(domain.contains(np.array([xhi])))):
            continue
        if n == 2:
            corners = np.array([[xlo[0], xhi[1]], [xhi[0], xlo[1]]])
            if not np.all(domain.contains(corners)):
                continue
        tl, th = phi.t_range(c[None], U)
        if not th[0] > tl[0]:
            continue
        tc = tl[0] + (th[0] - tl[0]) * rng.random()
        ht = 0.5 * size * (hi_t - lo_t) * (0.3 + 0.7 * rng.random())
        blo = np.concatenate([xlo, [tc - ht]])
        bhi = np.concatenate([xhi, [tc + ht]])
        if _box_in_window(U, blo, bhi, n):
            boxes.append((blo, bhi))
    return boxes


def check_c2_neumann(phi, domain, U, plan=None):
    """Limit of ``phi_x . nu`` approaching the boundary of Omega from inside."""
    plan = plan or SamplePlan()
    xb, nrm = domain.boundary_points(plan.n_x)
    lo, hi = phi.t_range(xb, U)
    ok = hi > lo
    xb, nrm, lo, hi = xb[ok], nrm[ok], lo[ok], hi[ok]
    frac = (np.arange(plan.n_t) + 0.5) / plan.n_t
    T = (lo[:, None] + frac[None, :] * (hi - lo)[:, None]).ravel()
    X = np.repeat(xb, plan.n_t, axis=0)
    N = np.repeat(nrm, plan.n_t, axis=0)
    delta = 1e-6 * domain.diam

    def normal_comp(s):
        return (phi(X - s * N, T)[0] * N).sum(1)

    limit = _one_sided_limit(normal_comp, delta)
    wit = [(X[i].tolist(), float(T[i])) for i in range(len(T))]
    return _equality("c2", np.abs(limit), wit, plan.tol_numeric)


@dataclass
class CalibrationReport:
    results: list
    verdict: str
    tolerances: dict = field(default_factory=dict)

    def __getitem__(self, cond):
        for r in self.results:
            if r.condition == cond:
                return r
        raise KeyError(cond)

    def __contains__(self, cond):
        return any(r.condition == cond for r in self.results)

    def to_dict(self):
        return {"schema": 1, "verdict": self.verdict, "tolerances": self.tolerances,
                "conditions": [r.to_dict() for r in self.results]}

    def table(self):
        lines = [f"{'condition':<22}{'pass':<6}{'margin':>14}  samples"]
        for r in self.results:
            lines.append(f"{r.condition:<22}{'yes' if r.passed else 'NO':<6}{r.margin:>14.3e}  {r.samples_used}")
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def make_report(results, plan):
    passed = {r.condition: r.passed for r in results}
    core = [c for c in passed if c != "c2"]
    if all(passed[c] for c in core):
        verdict = "neumann-calibration" if passed.get("c2") else "calibration"
    else:
        verdict = "fails"
    return CalibrationReport(results, verdict, {"analytic": plan.tol_analytic, "numeric": plan.tol_numeric})


def verify_ms(phi, u, U, p, domain, plan=None, c2=True, boxes=0):
    """Run every Mumford-Shah calibration check and classify the field."""
    plan = plan or SamplePlan()
    results = [check_a1_ms(phi, U, p, domain, plan), check_a2_ms(phi, u, p, U, domain, plan),
               check_b1_ms(phi, U, p.alpha, domain, plan), check_b2_ms(phi, u, p.alpha, U, plan),
               check_c1_divergence(phi, U, domain, plan)]
    if phi.interfaces:
        results.append(check_interface_continuity(phi, U, domain, plan))
    if boxes:
        bx = random_boxes(phi, U, domain, boxes, plan.rng(6))
        results.append(check_box_flux(phi, U, bx, plan.tol_numeric))
    if c2:
        results.append(check_c2_neumann(phi, domain, U, plan))
    return make_report(results, plan)


def _nu_grid(n, count):
    if n == 1:
        return np.array([[-1.0], [1.0]])
    th = 2 * math.pi * np.arange(count) / count
    return np.stack([np.cos(th), np.sin(th)], 1)


def check_general_calibration(phi, u, U, G, domain, plan=None, v_samples=None, nu_count=16, c2=False):
    """Conditions for a general bulk/jump integrand pair.

    With ``G.fstar`` the bulk inequality is checked through the convex
    conjugate; otherwise it is sampled over the rows of ``v_samples``.
    """
    plan = plan or SamplePlan()
    if G.fstar is None and (v_samples is None or len(v_samples) == 0):
        raise ConfigurationError("need either a convex conjugate or a nonempty v-sample set")
    n = phi.dim
    tol = _tol(phi, plan)
    X, T = sample_xt(phi, U, domain, plan, salt=1)
    px, pt = phi(X, T)
    if G.fstar is not None:
        slack = pt - np.asarray(G.fstar(X, T, px), float)
    else:
        V = np.asarray(v_samples, float).reshape(-1, n)
        slack = np.full(len(T), np.inf)
        for v in V:
            vv = np.broadcast_to(v, px.shape)
            slack = np.minimum(slack, pt + np.asarray(G.f(X, T, vv), float) - (px * vv).sum(1))
    wit = [(X[i].tolist(), float(T[i])) for i in range(len(T))]
    results = [_inequality("a1", slack, wit, tol)]

    x, v, gu = _graph_samples(u, domain, plan, salt=2)
    if not np.all(U.contains(x, v)):
        raise PreconditionError("graph of u leaves the window U")
    qx, qt = phi(x, v)
    dev = np.abs((qx * gu).sum(1) - qt - np.asarray(G.f(x, v, gu), float))
    results.append(_equality("a2", dev, [(x[i].tolist(), float(v[i])) for i in range(len(v))], tol))

    nus = _nu_grid(n, nu_count)
    xs, cums, knots = cumulative_t_integrals(phi, U, domain, plan, salt=3)
    slack, wit = [], []
    for xi, c, kn in zip(xs, cums, knots):
        i, j = np.triu_indices(len(kn), k=1)
        keep = kn[j] > kn[i]
        i, j = i[keep], j[keep]
        dI = c[j] - c[i]
        best, arg = np.inf, None
        for nu in nus:
            lhs = dI @ nu
            rhs = np.asarray(G.psi(np.repeat(xi[None], len(i), 0), kn[i], kn[j],
                                   np.repeat(nu[None], len(i), 0)), float)
            s = np.broadcast_to(rhs, lhs.shape) - lhs
            q = int(np.argmin(s))
            if s[q] < best:
                best, arg = float(s[q]), (xi.tolist(), float(kn[i[q]]), float(kn[j[q]]), nu.tolist())
        slack.append(best)
        wit.append(arg)
    results.append(_inequality("b1", slack, wit, plan.tol_numeric))

    if not u.jumps:
        results.append(ConditionResult("b2", True, math.inf, None, 0, "equality", plan.tol_numeric,
                                       note="vacuous: no jumps"))
    else:
        devs, wits = [], []
        for P, _, nrm, lo, hi in u.jump_quadrature(plan.n_jump):
            integral = vertical_integrals(phi, P, lo, hi, "x")
            rhs = np.asarray(G.psi(P, lo, hi, nrm), float)
            devs.append(np.abs((integral * nrm).sum(1) - rhs))
            wits += [(P[k].tolist(), float(lo[k]), float(hi[k])) for k in range(len(P))]
        results.append(_equality("b2", np.concatenate(devs), wits, plan.tol_numeric))
    results.append(check_c1_divergence(phi, U, domain, plan))
    if c2:
        results.append(check_c2_neumann(phi, domain, U, plan))
    return make_report(results, plan)
