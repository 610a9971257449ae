"""Smooth scalar expressions used as the pieces of candidate functions.

Every expression maps points ``x`` of shape ``(k, n)`` to values of shape
``(k,)`` and provides its gradient ``(k, n)`` and Laplacian ``(k,)``.
Expressions built from named descriptors round-trip through ``to_dict`` /
``expr_from_dict``; ``Callable`` wraps arbitrary Python functions and is not
serializable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import ConfigurationError

_REGISTRY = {}


def _register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


def as_points(x, dim=None):
    """Coerce ``x`` to a float array of shape ``(k, n)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        if dim is not None and dim > 1 and x.shape[0] == dim:
            x = x.reshape(1, dim)
        else:
            x = x.reshape(-1, 1)
    return x


class Expr:
    kind = "abstract"

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def laplacian(self, x):
        raise NotImplementedError

    def to_dict(self):
        raise ConfigurationError(f"{type(self).__name__} is not serializable")

    def __add__(self, other):
        return Sum((self, other))


@_register
@dataclass(frozen=True)
class Constant(Expr):
    c: float
    kind = "constant"

    def value(self, x):
        x = as_points(x)
        return np.full(x.shape[0], float(self.c))

    def grad(self, x):
        return np.zeros_like(as_points(x))

    def laplacian(self, x):
        return np.zeros(as_points(x).shape[0])

    def to_dict(self):
        return {"kind": self.kind, "c": float(self.c)}


@_register
@dataclass(frozen=True)
class Affine(Expr):
    """``c0 + coef . x``."""

    c0: float
    coef: tuple
    kind = "affine"

    def value(self, x):
        x = as_points(x, len(self.coef))
        return self.c0 + x @ np.asarray(self.coef, dtype=float)

    def grad(self, x):
        x = as_points(x, len(self.coef))
        return np.broadcast_to(np.asarray(self.coef, dtype=float), x.shape).copy()

    def laplacian(self, x):
        return np.zeros(as_points(x, len(self.coef)).shape[0])

    def to_dict(self):
        return {"kind": self.kind, "c0": float(self.c0), "coef": [float(c) for c in self.coef]}


@_register
@dataclass(frozen=True)
class HarmonicPolynomial(Expr):
    """Quadratic harmonic polynomial in the plane.

    ``a (x^2 - y^2) + b x y + cx x + cy y + c0``
    """

    a: float = 0.0
    b: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    c0: float = 0.0
    kind = "harmonic-polynomial"

    def value(self, x):
        x = as_points(x, 2)
        X, Y = x[:, 0], x[:, 1]
        return self.a * (X * X - Y * Y) + self.b * X * Y + self.cx * X + self.cy * Y + self.c0

    def grad(self, x):
        x = as_points(x, 2)
        X, Y = x[:, 0], x[:, 1]
        return np.stack([2 * self.a * X + self.b * Y + self.cx,
                         -2 * self.a * Y + self.b * X + self.cy], axis=1)

    def laplacian(self, x):
        return np.zeros(as_points(x, 2).shape[0])

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "cx": self.cx,
                "cy": self.cy, "c0": self.c0}


@_register
@dataclass(frozen=True)
class SineSeries(Expr):
    """``sum_k c_k sin(k pi (x - lo) / (hi - lo))`` along one axis; vanishes at lo, hi."""

    lo: float
    hi: float
    coefs: tuple
    axis: int = 0
    kind = "sine-series"

    def _modes(self, x):
        x = as_points(x)
        L = self.hi - self.lo
        k = np.arange(1, len(self.coefs) + 1)
        s = (x[:, self.axis, None] - self.lo) * (math.pi / L)
        return x, k * math.pi / L, np.asarray(self.coefs, dtype=float), s * k

    def value(self, x):
        _, _, c, arg = self._modes(x)
        return np.sin(arg) @ c

    def grad(self, x):
        x, w, c, arg = self._modes(x)
        g = np.zeros_like(x)
        g[:, self.axis] = np.cos(arg) @ (c * w)
        return g

    def laplacian(self, x):
        _, w, c, arg = self._modes(x)
        return -(np.sin(arg) @ (c * w * w))

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi,
                "coefs": [float(c) for c in self.coefs], "axis": self.axis}


def _contract(A, B, ia, ib):
    """``(A[ia] * B[ib]).sum(1)``; on tensor grids via the small table ``A @ B.T``."""
    if A.shape[0] * B.shape[0] <= 4 * ia.shape[0]:
        return (A @ B.T)[ia, ib]
    return (A[ia] * B[ib]).sum(1)


@_register
@dataclass(frozen=True)
class SineProduct(Expr):
    """Double sine series on a rectangle; vanishes on its boundary."""

    lo: tuple
    hi: tuple
    coefs: tuple  # coefs[i][j] multiplies sin((i+1) pi X) sin((j+1) pi Y)
    kind = "sine-product"

    def _parts(self, x):
        x = as_points(x, 2)
        c = np.asarray(self.coefs, dtype=float)
        L = np.asarray(self.hi, dtype=float) - np.asarray(self.lo, dtype=float)
        wx = np.arange(1, c.shape[0] + 1) * math.pi / L[0]
        wy = np.arange(1, c.shape[1] + 1) * math.pi / L[1]
        ux, ix = np.unique(x[:, 0], return_inverse=True)
        uy, iy = np.unique(x[:, 1], return_inverse=True)
        ax = (ux[:, None] - self.lo[0]) * wx
        ay = (uy[:, None] - self.lo[1]) * wy
        return c, wx, wy, ax, ay, ix.ravel(), iy.ravel()

    def value(self, x):
        c, _, _, ax, ay, ix, iy = self._parts(x)
        return _contract(np.sin(ax) @ c, np.sin(ay), ix, iy)

    def grad(self, x):
        c, wx, wy, ax, ay, ix, iy = self._parts(x)
        gx = _contract((np.cos(ax) * wx) @ c, np.sin(ay), ix, iy)
        gy = _contract(np.sin(ax) @ c, np.cos(ay) * wy, ix, iy)
        return np.stack([gx, gy], axis=1)

    def laplacian(self, x):
        c, wx, wy, ax, ay, ix, iy = self._parts(x)
        w2 = wx[:, None] ** 2 + wy[None, :] ** 2
        return -_contract(np.sin(ax) @ (c * w2), np.sin(ay), ix, iy)

    def to_dict(self):
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi),
                "coefs": np.asarray(self.coefs, dtype=float).tolist()}


@_register
@dataclass(frozen=True)
class DiskBump(Expr):
    """``(r^2 - |x - c|^2) (c0 + c1 (x - cx) + c2 (y - cy))``; vanishes on the circle."""

    center: tuple
    r: float
    coefs: tuple
    kind = "disk-bump"

    def value(self, x):
        x = as_points(x, 2)
        d = x - np.asarray(self.center)
        c0, c1, c2 = self.coefs
        return (self.r ** 2 - (d * d).sum(1)) * (c0 + c1 * d[:, 0] + c2 * d[:, 1])

    def grad(self, x):
        x = as_points(x, 2)
        d = x - np.asarray(self.center)
        c0, c1, c2 = self.coefs
        q = self.r ** 2 - (d * d).sum(1)
        p = c0 + c1 * d[:, 0] + c2 * d[:, 1]
        return -2 * d * p[:, None] + q[:, None] * np.array([c1, c2])

    def laplacian(self, x):
        x = as_points(x, 2)
        d = x - np.asarray(self.center)
        c0, c1, c2 = self.coefs
        p = c0 + c1 * d[:, 0] + c2 * d[:, 1]
        # lap(q p) = p lap q + 2 grad q . grad p, lap q = -4
        return -4 * p - 4 * (c1 * d[:, 0] + c2 * d[:, 1])

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "r": self.r,
                "coefs": [float(c) for c in self.coefs]}


@_register
@dataclass(frozen=True)
class RampBlend(Expr):
    """Linear interpolation between two values across ``[lo, hi]`` along one axis."""

    lo: float
    hi: float
    v_lo: float
    v_hi: float
    axis: int = 0
    kind = "ramp"

    def value(self, x):
        x = as_points(x)
        s = (x[:, self.axis] - self.lo) / (self.hi - self.lo)
        return self.v_lo + s * (self.v_hi - self.v_lo)

    def grad(self, x):
        x = as_points(x)
        g = np.zeros_like(x)
        g[:, self.axis] = (self.v_hi - self.v_lo) / (self.hi - self.lo)
        return g

    def laplacian(self, x):
        return np.zeros(as_points(x).shape[0])

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "v_lo": self.v_lo,
                "v_hi": self.v_hi, "axis": self.axis}


@_register
@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple
    kind = "sum"

    def value(self, x):
        return sum(t.value(x) for t in self.terms)

    def grad(self, x):
        return sum(t.grad(x) for t in self.terms)

    def laplacian(self, x):
        return sum(t.laplacian(x) for t in self.terms)

    def to_dict(self):
        return {"kind": self.kind, "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def _from(cls, d):
        return cls(tuple(expr_from_dict(t) for t in d["terms"]))


def _cos_sin_modes(theta, K):
    """``cos(k theta)``, ``sin(k theta)`` for ``k < K`` at the distinct angles, plus the inverse index.

    Quadrature grids repeat each coordinate many times, so the modes are
    evaluated on unique values only; row ``inv[i]`` belongs to ``theta[i]``.
    """
    uniq, inv = np.unique(theta, return_inverse=True)
    arg = np.outer(uniq, np.arange(K))
    return np.cos(arg), np.sin(arg), inv.ravel()


@_register
@dataclass(frozen=True, eq=False)
class CosineSeries2D(Expr):
    """Smooth cosine-series interpolant of nodal values on a rectangle.

    Built from a DCT-I of the nodal grid, so it reproduces the nodes exactly
    and has zero normal derivative on all four sides.
    """

    lo: tuple
    hi: tuple
    coef: np.ndarray = field(repr=False)
    kind = "cosine-series"

    @classmethod
    def from_nodes(cls, values, lo, hi, trim=1e-15):
        """Interpolant of nodal values; trailing modes below ``trim * max|coef|`` are dropped."""
        v = np.asarray(values, dtype=float)
        nx, ny = v.shape[0] - 1, v.shape[1] - 1
        y = scipy.fft.dctn(v, type=1)
        wx = np.full(nx + 1, 1.0 / nx)
        wx[[0, -1]] *= 0.5
        wy = np.full(ny + 1, 1.0 / ny)
        wy[[0, -1]] *= 0.5
        coef = y * wx[:, None] * wy[None, :]
        big = np.abs(coef) > trim * np.abs(coef).max() if coef.any() else np.zeros_like(coef, bool)
        if trim and big.any():
            rows, cols = np.nonzero(big)
            coef = coef[:rows.max() + 1, :cols.max() + 1]
        return cls(tuple(lo), tuple(hi), coef)

    def _basis(self, x):
        x = as_points(x, 2)
        L = np.asarray(self.hi) - np.asarray(self.lo)
        kx = np.arange(self.coef.shape[0]) * math.pi / L[0]
        ky = np.arange(self.coef.shape[1]) * math.pi / L[1]
        mx = _cos_sin_modes((x[:, 0] - self.lo[0]) * (math.pi / L[0]), self.coef.shape[0])
        my = _cos_sin_modes((x[:, 1] - self.lo[1]) * (math.pi / L[1]), self.coef.shape[1])
        return kx, ky, mx, my

    def value(self, x):
        _, _, (cx, _, ix), (cy, _, iy) = self._basis(x)
        return _contract(cx @ self.coef, cy, ix, iy)

    def grad(self, x):
        kx, ky, (cx, sx, ix), (cy, sy, iy) = self._basis(x)
        gx = _contract((-sx * kx) @ self.coef, cy, ix, iy)
        gy = _contract(cx @ self.coef, -sy * ky, ix, iy)
        return np.stack([gx, gy], axis=1)

    def laplacian(self, x):
        kx, ky, (cx, _, ix), (cy, _, iy) = self._basis(x)
        return (_contract((cx * -kx ** 2) @ self.coef, cy, ix, iy)
                + _contract(cx @ self.coef, cy * -ky ** 2, ix, iy))

    def to_dict(self):
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi),
                "coef": self.coef.tolist()}

    @classmethod
    def _from(cls, d):
        return cls(tuple(d["lo"]), tuple(d["hi"]), np.asarray(d["coef"], dtype=float))


class Callable(Expr):
    """Wraps user functions ``value(x)``, ``grad(x)`` and optionally ``laplacian(x)``."""

    kind = "callable"

    def __init__(self, value, grad, laplacian=None):
        self._value, self._grad, self._lap = value, grad, laplacian

    def value(self, x):
        return np.asarray(self._value(as_points(x)), dtype=float)

    def grad(self, x):
        return np.asarray(self._grad(as_points(x)), dtype=float)

    def laplacian(self, x):
        if self._lap is None:
            raise NotImplementedError("no Laplacian supplied")
        return np.asarray(self._lap(as_points(x)), dtype=float)


def expr_from_dict(d):
    try:
        cls = _REGISTRY[d["kind"]]
    except KeyError:
        raise ConfigurationError(f"unknown expression kind {d.get('kind')!r}") from None
    if hasattr(cls, "_from"):
        return cls._from(d)
    args = {k: v for k, v in d.items() if k != "kind"}
    for key in ("coef", "coefs", "lo", "hi", "center"):
        if key in args and isinstance(args[key], list):
            val = args[key]
            args[key] = tuple(tuple(r) if isinstance(r, list) else r for r in val)
    return cls(**args)
