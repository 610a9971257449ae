"""Domains, candidate functions, graph windows and piecewise vector fields.

Points in the base domain are arrays of shape ``(k, n)``; points of the
product space ``Omega x R`` are passed as a pair ``(x, t)`` with ``t`` of
shape ``(k,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, EvaluationError
from .expr import Constant, Expr, as_points, expr_from_dict

# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class IntervalDomain:
    a: float
    lo: float = 0.0
    kind = "interval"
    dim = 1

    def __post_init__(self):
        if not self.a > self.lo:
            raise ConfigurationError("interval must have positive length")

    @property
    def hi(self):
        return self.a

    @property
    def measure(self):
        return self.a - self.lo

    @property
    def diam(self):
        return self.a - self.lo

    def contains(self, x):
        x = as_points(x)[:, 0]
        return (x > self.lo) & (x < self.a)

    def sample(self, n, rng):
        return self.lo + (self.a - self.lo) * rng.random((n, 1))

    def boundary_points(self, n=2, rng=None):
        pts = np.array([[self.lo], [self.a]])
        return pts, np.array([[-1.0], [1.0]])

    def normal(self, x):
        x = as_points(x)[:, 0]
        out = np.where(np.isclose(x, self.lo), -1.0, np.where(np.isclose(x, self.a), 1.0, np.nan))
        if np.isnan(out).any():
            raise DomainError("normal requested off the boundary")
        return out[:, None]

    def grid(self, n):
        return np.linspace(self.lo, self.a, n)[:, None]

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "a": self.a}


@dataclass(frozen=True)
class RectangleDomain:
    x0: float
    x1: float
    y0: float
    y1: float
    kind = "rectangle"
    dim = 2

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigurationError("rectangle must have positive area")

    @property
    def lo(self):
        return (self.x0, self.y0)

    @property
    def hi(self):
        return (self.x1, self.y1)

    @property
    def measure(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def diam(self):
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def contains(self, x):
        x = as_points(x, 2)
        return (x[:, 0] > self.x0) & (x[:, 0] < self.x1) & (x[:, 1] > self.y0) & (x[:, 1] < self.y1)

    def sample(self, n, rng):
        u = rng.random((n, 2))
        return np.stack([self.x0 + (self.x1 - self.x0) * u[:, 0],
                         self.y0 + (self.y1 - self.y0) * u[:, 1]], axis=1)

    def boundary_points(self, n, rng=None, corner_gap=1e-3):
        """Points on the four sides (corners excluded) with outer normals."""
        per = max(n // 4, 1)
        s = (np.arange(per) + 0.5) / per
        if rng is not None:
            s = rng.random(per)
        s = corner_gap + (1 - 2 * corner_gap) * s
        X = self.x0 + (self.x1 - self.x0) * s
        Y = self.y0 + (self.y1 - self.y0) * s
        pts = np.concatenate([
            np.stack([X, np.full(per, self.y0)], 1), np.stack([X, np.full(per, self.y1)], 1),
            np.stack([np.full(per, self.x0), Y], 1), np.stack([np.full(per, self.x1), Y], 1)])
        nrm = np.concatenate([np.tile([0.0, -1.0], (per, 1)), np.tile([0.0, 1.0], (per, 1)),
                              np.tile([-1.0, 0.0], (per, 1)), np.tile([1.0, 0.0], (per, 1))])
        return pts, nrm

    def grid(self, n):
        xs = np.linspace(self.x0, self.x1, n)
        ys = np.linspace(self.y0, self.y1, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], 1)

    def to_dict(self):
        return {"kind": self.kind, "x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1}


@dataclass(frozen=True)
class DiskDomain:
    center: tuple
    r: float
    kind = "disk"
    dim = 2

    def __post_init__(self):
        if not self.r > 0:
            raise ConfigurationError("disk radius must be positive")

    @property
    def measure(self):
        return math.pi * self.r ** 2

    @property
    def diam(self):
        return 2 * self.r

    def contains(self, x):
        d = as_points(x, 2) - np.asarray(self.center)
        return (d * d).sum(1) < self.r ** 2

    def sample(self, n, rng):
        rho = self.r * np.sqrt(rng.random(n))
        th = 2 * math.pi * rng.random(n)
        return np.asarray(self.center) + np.stack([rho * np.cos(th), rho * np.sin(th)], 1)

    def boundary_points(self, n, rng=None):
        th = 2 * math.pi * ((np.arange(n) + 0.5) / n if rng is None else rng.random(n))
        nrm = np.stack([np.cos(th), np.sin(th)], 1)
        return np.asarray(self.center) + self.r * nrm, nrm

    def normal(self, x):
        d = as_points(x, 2) - np.asarray(self.center)
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def grid(self, n):
        xs = np.linspace(-self.r, self.r, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()], 1)
        P = P[(P * P).sum(1) <= self.r ** 2]
        return P + np.asarray(self.center)

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "r": self.r}


def domain_from_dict(d):
    kind = d["kind"]
    if kind == "interval":
        return IntervalDomain(d["a"], d.get("lo", 0.0))
    if kind == "rectangle":
        return RectangleDomain(d["x0"], d["x1"], d["y0"], d["y1"])
    if kind == "disk":
        return DiskDomain(tuple(d["center"]), d["r"])
    raise ConfigurationError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# Regions carrying the pieces of an SBV candidate


def _gl(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class Span:
    """Open interval ``(lo, hi)`` on the line."""

    lo: float
    hi: float

    def contains(self, x):
        x = as_points(x)[:, 0]
        return (x > self.lo) & (x < self.hi)

    def quadrature(self, n):
        h = (self.hi - self.lo) / n
        return (self.lo + h * (np.arange(n) + 0.5))[:, None], np.full(n, h)

    def cells(self, n):
        """Midpoint grid as ``(shape, points, weights, refine)``.

        ``refine(idx, s)`` returns ``s`` sub-midpoints per listed cell as
        ``(points, weights, owner)`` with ``owner`` indexing into ``idx``.
        """
        P, w = self.quadrature(n)
        h = (self.hi - self.lo) / n

        def refine(idx, s):
            off = h * ((np.arange(s) + 0.5) / s - 0.5)
            pts = (P[idx, 0][:, None] + off[None, :]).ravel()[:, None]
            return pts, np.full(pts.shape[0], h / s), np.repeat(np.arange(len(idx)), s)

        return (n,), P, w, refine

    def to_dict(self):
        return {"kind": "span", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle, optionally with circular holes removed."""

    lo: tuple
    hi: tuple
    holes: tuple = ()  # ((cx, cy, r), ...)

    def contains(self, x):
        x = as_points(x, 2)
        m = (x[:, 0] > self.lo[0]) & (x[:, 0] < self.hi[0]) & (x[:, 1] > self.lo[1]) & (x[:, 1] < self.hi[1])
        for cx, cy, r in self.holes:
            m &= (x[:, 0] - cx) ** 2 + (x[:, 1] - cy) ** 2 > r * r
        return m

    def quadrature(self, n):
        _, P, w, _ = self.cells(n)
        if self.holes:
            keep = w > 0
            P, w = P[keep], w[keep]
        return P, w

    def cells(self, n):
        """Structured midpoint grid; see :meth:`Span.cells`.  Nodes inside holes get zero weight."""
        Lx, Ly = self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]
        nx = max(int(round(n * Lx / max(Lx, Ly))), 1)
        ny = max(int(round(n * Ly / max(Lx, Ly))), 1)
        hx, hy = Lx / nx, Ly / ny
        X, Y = np.meshgrid(self.lo[0] + hx * (np.arange(nx) + 0.5),
                           self.lo[1] + hy * (np.arange(ny) + 0.5), indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()], 1)
        w = np.full(P.shape[0], hx * hy)
        if self.holes:
            w = np.where(self.contains(P), w, 0.0)

        def refine(idx, s):
            f = (np.arange(s) + 0.5) / s - 0.5
            ox, oy = np.meshgrid(hx * f, hy * f, indexing="ij")
            off = np.stack([ox.ravel(), oy.ravel()], 1)
            pts = (P[idx][:, None, :] + off[None]).reshape(-1, 2)
            wts = np.full(pts.shape[0], hx * hy / (s * s))
            if self.holes:
                wts = np.where(self.contains(pts), wts, 0.0)
            return pts, wts, np.repeat(np.arange(len(idx)), s * s)

        return (nx, ny), P, w, refine

    def to_dict(self):
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi),
                "holes": [list(h) for h in self.holes]}


@dataclass(frozen=True)
class Sector:
    """Annular sector ``r0 < |x - c| < r1``, ``th0 <= theta < th1`` (radians, th0 < th1)."""

    center: tuple
    r0: float
    r1: float
    th0: float
    th1: float

    def contains(self, x):
        d = as_points(x, 2) - np.asarray(self.center)
        rho = np.hypot(d[:, 0], d[:, 1])
        th = np.mod(np.arctan2(d[:, 1], d[:, 0]) - self.th0, 2 * math.pi)
        return (rho > self.r0) & (rho < self.r1) & (th < self.th1 - self.th0)

    def quadrature(self, n):
        return self.cells(n)[1:3]

    def cells(self, n):
        """Structured polar midpoint grid; see :meth:`Span.cells`."""
        nr = max(n // 2, 1)
        nt = max(int(round(n * (self.th1 - self.th0) / math.pi)), 1)
        hr, ht = (self.r1 - self.r0) / nr, (self.th1 - self.th0) / nt
        R, T = np.meshgrid(self.r0 + hr * (np.arange(nr) + 0.5),
                           self.th0 + ht * (np.arange(nt) + 0.5), indexing="ij")
        R, T = R.ravel(), T.ravel()
        c = np.asarray(self.center)
        P = c + np.stack([R * np.cos(T), R * np.sin(T)], 1)

        def refine(idx, s):
            f = (np.arange(s) + 0.5) / s - 0.5
            orr, ot = np.meshgrid(hr * f, ht * f, indexing="ij")
            rr = (R[idx][:, None] + orr.ravel()[None]).ravel()
            tt = (T[idx][:, None] + ot.ravel()[None]).ravel()
            pts = c + np.stack([rr * np.cos(tt), rr * np.sin(tt)], 1)
            return pts, rr * hr * ht / (s * s), np.repeat(np.arange(len(idx)), s * s)

        return (nr, nt), P, R * hr * ht, refine

    def to_dict(self):
        return {"kind": "sector", "center": list(self.center), "r0": self.r0, "r1": self.r1,
                "th0": self.th0, "th1": self.th1}


def region_from_dict(d):
    kind = d["kind"]
    if kind == "span":
        return Span(d["lo"], d["hi"])
    if kind == "box":
        return Box(tuple(d["lo"]), tuple(d["hi"]), tuple(tuple(h) for h in d.get("holes", ())))
    if kind == "sector":
        return Sector(tuple(d["center"]), d["r0"], d["r1"], d["th0"], d["th1"])
    raise ConfigurationError(f"unknown region kind {kind!r}")


# ---------------------------------------------------------------------------
# Jump components


@dataclass(frozen=True)
class JumpPoint:
    """Jump at ``x`` on the line; ``normal`` is +1 or -1 (towards the u+ side)."""

    x: float
    minus: Expr
    plus: Expr
    normal: float = 1.0

    def quadrature(self, n):
        return np.array([[self.x]]), np.ones(1), np.array([[float(self.normal)]])

    def distance(self, p):
        return np.abs(as_points(p)[:, 0] - self.x)

    def normals(self, p):
        return np.full((as_points(p).shape[0], 1), float(self.normal))

    def sample(self, n, rng):
        return np.full((n, 1), self.x)

    @property
    def measure(self):
        return 1.0

    def to_dict(self):
        return {"kind": "point", "x": self.x, "normal": self.normal,
                "minus": self.minus.to_dict(), "plus": self.plus.to_dict()}


@dataclass(frozen=True)
class JumpSegment:
    """Straight jump segment from ``p0`` to ``p1`` with constant unit normal."""

    p0: tuple
    p1: tuple
    minus: Expr
    plus: Expr
    normal: tuple

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(nrm) - 1) > 1e-12:
            raise ConfigurationError("jump normal must have unit length")

    @property
    def measure(self):
        return float(np.linalg.norm(np.subtract(self.p1, self.p0)))

    def _at(self, s):
        p0, p1 = np.asarray(self.p0, float), np.asarray(self.p1, float)
        return p0 + s[:, None] * (p1 - p0)

    def quadrature(self, n):
        s = (np.arange(n) + 0.5) / n
        return self._at(s), np.full(n, self.measure / n), np.tile(np.asarray(self.normal, float), (n, 1))

    def sample(self, n, rng):
        return self._at(rng.random(n))

    def distance(self, p):
        p = as_points(p, 2)
        p0, p1 = np.asarray(self.p0, float), np.asarray(self.p1, float)
        d = p1 - p0
        s = np.clip(((p - p0) @ d) / (d @ d), 0, 1)
        return np.linalg.norm(p - (p0 + s[:, None] * d), axis=1)

    def normals(self, p):
        return np.tile(np.asarray(self.normal, float), (as_points(p, 2).shape[0], 1))

    def to_dict(self):
        return {"kind": "segment", "p0": list(self.p0), "p1": list(self.p1), "normal": list(self.normal),
                "minus": self.minus.to_dict(), "plus": self.plus.to_dict()}


@dataclass(frozen=True)
class JumpArc:
    """Circular arc; the normal is the outward radial direction if ``outward``."""

    center: tuple
    r: float
    th0: float
    th1: float
    minus: Expr
    plus: Expr
    outward: bool = True

    @property
    def measure(self):
        return self.r * (self.th1 - self.th0)

    def _at(self, th):
        u = np.stack([np.cos(th), np.sin(th)], 1)
        return np.asarray(self.center) + self.r * u, u * (1.0 if self.outward else -1.0)

    def quadrature(self, n):
        th = self.th0 + (self.th1 - self.th0) * (np.arange(n) + 0.5) / n
        p, nrm = self._at(th)
        return p, np.full(n, self.measure / n), nrm

    def sample(self, n, rng):
        return self._at(self.th0 + (self.th1 - self.th0) * rng.random(n))[0]

    def distance(self, p):
        d = as_points(p, 2) - np.asarray(self.center)
        rho = np.hypot(d[:, 0], d[:, 1])
        th = np.mod(np.arctan2(d[:, 1], d[:, 0]) - self.th0, 2 * math.pi)
        on = th <= (self.th1 - self.th0) + 1e-12
        ends = np.minimum(np.linalg.norm(as_points(p, 2) - self._at(np.array([self.th0]))[0], axis=1),
                          np.linalg.norm(as_points(p, 2) - self._at(np.array([self.th1]))[0], axis=1))
        return np.where(on, np.abs(rho - self.r), ends)

    def normals(self, p):
        d = as_points(p, 2) - np.asarray(self.center)
        return d / np.linalg.norm(d, axis=1, keepdims=True) * (1.0 if self.outward else -1.0)

    def to_dict(self):
        return {"kind": "arc", "center": list(self.center), "r": self.r, "th0": self.th0,
                "th1": self.th1, "outward": self.outward,
                "minus": self.minus.to_dict(), "plus": self.plus.to_dict()}


def jump_from_dict(d):
    kind = d["kind"]
    mi, pl = expr_from_dict(d["minus"]), expr_from_dict(d["plus"])
    if kind == "point":
        return JumpPoint(d["x"], mi, pl, d["normal"])
    if kind == "segment":
        return JumpSegment(tuple(d["p0"]), tuple(d["p1"]), mi, pl, tuple(d["normal"]))
    if kind == "arc":
        return JumpArc(tuple(d["center"]), d["r"], d["th0"], d["th1"], mi, pl, d["outward"])
    raise ConfigurationError(f"unknown jump kind {kind!r}")


# ---------------------------------------------------------------------------
# SBV candidates


@dataclass(frozen=True)
class SbvFunction:
    """Piecewise-smooth function with an explicit jump set.

    ``pieces`` is a sequence of ``(region, expr)``; the regions partition the
    domain up to the jump set.
    """

    domain: object
    pieces: tuple
    jumps: tuple = ()

    @property
    def dim(self):
        return self.domain.dim

    def piece_index(self, x):
        x = as_points(x, self.dim)
        idx = np.full(x.shape[0], -1)
        for i, (region, _) in enumerate(self.pieces):
            m = (idx < 0) & region.contains(x)
            idx[m] = i
        return idx

    def _dispatch(self, x, attr, shape_tail=()):
        x = as_points(x, self.dim)
        idx = self.piece_index(x)
        out = np.full((x.shape[0],) + shape_tail, np.nan)
        for i, (_, ex) in enumerate(self.pieces):
            m = idx == i
            if m.any():
                out[m] = getattr(ex, attr)(x[m])
        return out

    def value(self, x):
        return self._dispatch(x, "value")

    def grad(self, x):
        return self._dispatch(x, "grad", (self.dim,))

    def __call__(self, x):
        return self.value(x)

    def jump_quadrature(self, n):
        """Yield ``(points, weights, normals, minus, plus)`` per jump component."""
        for j in self.jumps:
            p, w, nrm = j.quadrature(n)
            yield p, w, nrm, j.minus.value(p), j.plus.value(p)

    def trace_values(self, x):
        """Values on the graph: ``(u-, u+)`` with both equal to ``u`` off the jump set."""
        v = self.value(x)
        return v, v

    def to_dict(self):
        return {"domain": self.domain.to_dict(),
                "pieces": [{"region": r.to_dict(), "expr": e.to_dict()} for r, e in self.pieces],
                "jumps": [j.to_dict() for j in self.jumps]}

    @classmethod
    def from_dict(cls, d):
        return cls(domain_from_dict(d["domain"]),
                   tuple((region_from_dict(p["region"]), expr_from_dict(p["expr"])) for p in d["pieces"]),
                   tuple(jump_from_dict(j) for j in d["jumps"]))

    def check_consistency(self, n=100, rng=None, delta=1e-7, tol=1e-6):
        """Largest mismatch between declared traces and one-sided piece limits.

        Also returns the smallest normal-orientation score; a positive score
        means the normal points from the u- piece into the u+ piece.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        worst, orient = 0.0, math.inf
        for j in self.jumps:
            p = j.sample(n, rng)
            nrm = j.normals(p)
            inside = self.domain.contains(p + 2 * delta * nrm) & self.domain.contains(p - 2 * delta * nrm)
            p, nrm = p[inside], nrm[inside]
            if not len(p):
                continue
            lo, hi = j.minus.value(p), j.plus.value(p)
            if np.any(lo >= hi):
                raise ConfigurationError("traces must satisfy u- < u+")
            vm, vp = self.value(p - delta * nrm), self.value(p + delta * nrm)
            worst = max(worst, float(np.max(np.abs(vm - lo))), float(np.max(np.abs(vp - hi))))
            orient = min(orient, float(np.min(vp - vm)))
        return worst, orient


def traces_and_normal(u, p, tol=1e-9):
    """Return ``(u_minus, u_plus, normal)`` at a point of the jump set."""
    p = as_points(p, u.dim)
    for j in u.jumps:
        if float(j.distance(p)[0]) <= tol:
            lo, hi = float(j.minus.value(p)[0]), float(j.plus.value(p)[0])
            if not lo < hi:
                raise ConfigurationError("declared traces violate u- < u+")
            return lo, hi, j.normals(p)[0]
    raise DomainError(f"point {p[0].tolist()} is not on the jump set")


def piecewise_constant_1d(domain, breaks, values):
    """1D step function with given break points and piece values."""
    edges = [domain.lo, *breaks, domain.a]
    pieces = tuple((Span(edges[i], edges[i + 1]), Constant(v)) for i, v in enumerate(values))
    jumps = []
    for i, xb in enumerate(breaks):
        a, b = values[i], values[i + 1]
        lo, hi = min(a, b), max(a, b)
        jumps.append(JumpPoint(xb, Constant(lo), Constant(hi), 1.0 if b > a else -1.0))
    return SbvFunction(domain, pieces, tuple(jumps))


def sector_constant(domain, values, offset=0.0):
    """Disk split into ``len(values)`` equal sectors with constant values.

    Sector ``i`` covers ``offset + 2 pi i / k <= theta < offset + 2 pi (i+1) / k``.
    """
    k = len(values)
    c, r = domain.center, domain.r
    pieces, jumps = [], []
    for i, v in enumerate(values):
        th0 = offset + 2 * math.pi * i / k
        pieces.append((Sector(c, 0.0, r, th0, th0 + 2 * math.pi / k), Constant(v)))
    for i in range(k):
        th = offset + 2 * math.pi * i / k
        before, after = values[i - 1], values[i]
        d = np.array([math.cos(th), math.sin(th)])
        ccw = np.array([-d[1], d[0]])
        lo, hi = min(before, after), max(before, after)
        nrm = ccw if after > before else -ccw
        jumps.append(JumpSegment(tuple(c), tuple(np.asarray(c) + r * d), Constant(lo), Constant(hi),
                                 tuple(float(v) for v in nrm)))
    return SbvFunction(domain, tuple(pieces), tuple(jumps))


# ---------------------------------------------------------------------------
# Graph windows


@dataclass(frozen=True)
class GraphWindow:
    """Open set ``tau1(x) < t < tau2(x)``; ``None`` means an infinite bound."""

    tau1: Optional[Callable] = None
    tau2: Optional[Callable] = None

    @classmethod
    def whole(cls):
        return cls()

    @property
    def is_whole(self):
        return self.tau1 is None and self.tau2 is None

    def lower(self, x):
        x = as_points(x)
        return np.full(x.shape[0], -np.inf) if self.tau1 is None else np.asarray(self.tau1(x), float)

    def upper(self, x):
        x = as_points(x)
        return np.full(x.shape[0], np.inf) if self.tau2 is None else np.asarray(self.tau2(x), float)

    def contains(self, x, t):
        return (self.lower(x) < t) & (t < self.upper(x))


@dataclass
class WindowCheck:
    contained: bool
    margin: float
    witness: Optional[tuple]


def graph_window_contains(U, u, n=2000, rng=None):
    """Check that the graph of ``u`` lies strictly inside ``U`` at sampled points."""
    if U.is_whole:
        return WindowCheck(True, math.inf, None)
    rng = np.random.default_rng(0) if rng is None else rng
    xs = [u.domain.sample(n, rng)]
    lows, highs = [], []
    v = u.value(xs[0])
    lows.append(v)
    highs.append(v)
    for j in u.jumps:
        p = j.sample(max(n // 10, 1), rng) if not isinstance(j, JumpPoint) else j.sample(1, rng)
        xs.append(p)
        lows.append(j.minus.value(p))
        highs.append(j.plus.value(p))
    x = np.concatenate(xs)
    lo, hi = np.concatenate(lows), np.concatenate(highs)
    ok = np.isfinite(lo)
    x, lo, hi = x[ok], lo[ok], hi[ok]
    margins = np.minimum(lo - U.lower(x), U.upper(x) - hi)
    i = int(np.argmin(margins))
    m = float(margins[i])
    return WindowCheck(m > 0, m, (x[i].tolist(), float(lo[i]), float(hi[i])))


# ---------------------------------------------------------------------------
# Piecewise vector fields on Omega x R


@dataclass(frozen=True)
class FieldRegion:
    """Open region where every gate is negative; ``divergence`` is optional."""

    name: str
    gates: Callable  # (x, t) -> (k, m)
    divergence: Optional[Callable] = None

    def contains(self, x, t):
        g = np.asarray(self.gates(x, t), float)
        if g.ndim == 1:
            g = g[:, None]
        return np.all(g < 0, axis=1)


@dataclass(frozen=True)
class Interface:
    """Discontinuity hypersurface with its own sampler and unit normal."""

    name: str
    sampler: Callable  # (n, rng) -> (x, t)
    normal: Callable  # (x, t) -> (k, n + 1)


@dataclass(frozen=True)
class PiecewiseField:
    """Bounded vector field ``phi = (phi_x, phi_t)`` on a graph window.

    ``func(x, t)`` returns ``(phi_x, phi_t)`` with shapes ``(k, n)``, ``(k,)``.
    ``t_extent`` bounds the t-range where the field has structure; samplers
    use it whenever the window is unbounded.
    """

    func: Callable
    dim: int
    bound: float
    t_extent: tuple
    regions: tuple = ()
    interfaces: tuple = ()
    name: str = "field"
    params: dict = field(default_factory=dict)

    def __call__(self, x, t):
        x = as_points(x, self.dim)
        t = np.broadcast_to(np.asarray(t, float), (x.shape[0],))
        px, pt = self.func(x, t)
        return np.asarray(px, float).reshape(x.shape[0], self.dim), np.asarray(pt, float).reshape(x.shape[0])

    def evaluate(self, x, t):
        return self(x, t)

    def level_sets(self, x, t):
        """All region gates stacked as ``(k, m)``; empty if no regions are declared."""
        x = as_points(x, self.dim)
        cols = []
        for r in self.regions:
            g = np.asarray(r.gates(x, t), float)
            cols.append(g[:, None] if g.ndim == 1 else g)
        if not cols:
            return np.zeros((x.shape[0], 0))
        return np.concatenate(cols, axis=1)

    def t_range(self, x, U=None):
        """Finite sampling range ``(lo, hi)`` per point, clipped to the window."""
        x = as_points(x, self.dim)
        lo, hi = self.t_extent
        lo = np.full(x.shape[0], float(lo))
        hi = np.full(x.shape[0], float(hi))
        if U is not None:
            lo = np.maximum(lo, U.lower(x))
            hi = np.minimum(hi, U.upper(x))
        return lo, hi

    def max_norm(self, n=10_000, domain=None, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        x = domain.sample(n, rng)
        lo, hi = self.t_extent
        t = lo + (hi - lo) * rng.random(n)
        px, pt = self(x, t)
        return float(np.sqrt((px * px).sum(1) + pt * pt).max())


# ---------------------------------------------------------------------------
# Energies


@dataclass(frozen=True)
class Energy:
    gradient_term: float
    jump_term: float
    fidelity_term: float = 0.0

    @property
    def total(self):
        return self.gradient_term + self.jump_term + self.fidelity_term

    def to_dict(self):
        return {"gradient_term": self.gradient_term, "jump_term": self.jump_term,
                "fidelity_term": self.fidelity_term, "total": self.total}


def check_finite(values, points, what):
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise EvaluationError(f"{what} is not finite at {np.asarray(points)[i].tolist()}",
                              np.asarray(points)[i])
