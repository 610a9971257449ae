"""Neumann problem ``Delta u = beta (u - g)`` on a rectangle by finite differences.

The 5-point Laplacian uses ghost nodes reflected across the boundary, which
makes the plain operator non-symmetric at boundary rows.  Multiplying by the
trapezoid weights ``W = Wx (x) Wy`` restores symmetry, so the weighted
system ``W (-Delta_h + beta) u = W beta g`` is solved by conjugate gradients.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .core import RectangleDomain
from .errors import ConfigurationError, NumericError, ParameterError
from .expr import CosineSeries2D, Expr


def _neumann_1d(n, h):
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    D = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    D[0, 1] = -2.0
    D[n - 1, n - 2] = -2.0
    return D.tocsr() / (h * h)


def _trap(n):
    w = np.ones(n)
    w[[0, -1]] = 0.5
    return w


def _fourth_difference(u, axis, h):
    """``delta^4 u / h^4`` with even reflection at both ends."""
    v = np.moveaxis(u, axis, 0)
    ext = np.concatenate([v[2:0:-1], v, v[-2:-4:-1]], axis=0)
    d4 = ext[:-4] - 4 * ext[1:-3] + 6 * ext[2:-2] - 4 * ext[3:-1] + ext[4:]
    return np.moveaxis(d4, 0, axis) / h ** 4


@dataclass
class NeumannSolution:
    domain: RectangleDomain
    values: np.ndarray
    residual: float
    iterations: int
    beta: float

    @property
    def axes(self):
        nx, ny = self.values.shape
        return (np.linspace(self.domain.x0, self.domain.x1, nx), np.linspace(self.domain.y0, self.domain.y1, ny))

    def interpolant(self):
        """Smooth cosine-series interpolant of the nodal solution."""
        return CosineSeries2D.from_nodes(self.values, self.domain.lo, self.domain.hi)


def _grid_values(g, domain, shape):
    if isinstance(g, np.ndarray):
        return np.asarray(g, float)
    xs = np.linspace(domain.x0, domain.x1, shape[0])
    ys = np.linspace(domain.y0, domain.y1, shape[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], 1)
    vals = g.value(P) if isinstance(g, Expr) else g(P)
    return np.asarray(vals, float).reshape(shape)


def solve_neumann(g, beta, domain, shape=None, order=2, rtol=1e-8, maxiter=20_000):
    """Solve ``-Delta u + beta u = beta g`` with homogeneous Neumann data.

    ``g`` is a nodal array, or a callable / expression evaluated on a grid of
    the given ``shape``.  ``order=4`` adds one deferred-correction sweep that
    cancels the leading truncation error of the 5-point stencil.
    """
    if not beta > 0:
        raise ParameterError("beta must be positive (the pure Neumann Laplacian is singular)")
    if order not in (2, 4):
        raise ConfigurationError("order must be 2 or 4")
    if shape is None:
        if not isinstance(g, np.ndarray):
            raise ConfigurationError("grid shape required for a function datum")
        shape = g.shape
    G = _grid_values(g, domain, shape)
    nx, ny = G.shape
    if nx < 8 or ny < 8:
        raise ConfigurationError("grid must be at least 8 x 8")
    hx = (domain.x1 - domain.x0) / (nx - 1)
    hy = (domain.y1 - domain.y0) / (ny - 1)
    Dx, Dy = _neumann_1d(nx, hx), _neumann_1d(ny, hy)
    A = sp.kron(Dx, sp.identity(ny)) + sp.kron(sp.identity(nx), Dy) + beta * sp.identity(nx * ny)
    W = np.outer(_trap(nx), _trap(ny)).ravel()
    WA = (sp.diags(W) @ A).tocsr()

    def solve(rhs, x0):
        # cg tolerance is relative to the weighted rhs; tighten it so the
        # unweighted max-norm residual lands below rtol
        it = [0]

        def count(_):
            it[0] += 1

        sol, info = cg(WA, W * rhs, x0=x0, rtol=rtol * 1e-3, atol=0.0, maxiter=maxiter, callback=count)
        res = float(np.max(np.abs(rhs - A @ sol)))
        scale = max(float(np.max(np.abs(rhs))), 1e-300)
        if info != 0 or res > rtol * scale:
            raise NumericError(f"conjugate gradients did not converge (residual {res:.3e})", res)
        return sol, res, it[0]

    rhs = beta * G.ravel()
    u, res, its = solve(rhs, G.ravel().copy())
    if order == 4:
        U0 = u.reshape(nx, ny)
        corr = hx ** 2 / 12 * _fourth_difference(U0, 0, hx) + hy ** 2 / 12 * _fourth_difference(U0, 1, hy)
        u, res, its2 = solve(rhs - corr.ravel(), u)
        its += its2
    return NeumannSolution(domain, u.reshape(nx, ny), res, its, float(beta))


def oscillation_and_slope(u, domain, n=201):
    """``(sup u - inf u, sup |grad u|)`` sampled on a grid (or taken from nodal values)."""
    if isinstance(u, NeumannSolution):
        v = u.values
        gx, gy = np.gradient(v, *u.axes, edge_order=2)
        return float(v.max() - v.min()), float(np.sqrt(gx * gx + gy * gy).max())
    P = domain.grid(n)
    v = u.value(P)
    gr = u.grad(P)
    return float(v.max() - v.min()), float(np.linalg.norm(gr, axis=1).max())


def check_condition_e1(u, alpha, domain, n=201):
    """Whether ``osc(u) sup|grad u| <= alpha`` and the margin ``alpha - osc sup|grad u|``."""
    osc, slope = oscillation_and_slope(u, domain, n)
    margin = alpha - osc * slope
    return margin >= 0, margin


# ---------------------------------------------------------------------------
# grid IO


def write_grid_csv(path, values):
    np.savetxt(path, np.asarray(values, float), delimiter=",", fmt="%.17g")


def read_grid_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def write_grid_bin(path, values):
    """Little-endian header of two int64 dims followed by row-major float64 values."""
    v = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", *v.shape))
        fh.write(v.tobytes())


def read_grid_bin(path):
    with open(path, "rb") as fh:
        nx, ny = struct.unpack("<qq", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * ny:
        raise ConfigurationError(f"binary grid holds {data.size} values, header says {nx}x{ny}")
    return data.reshape(nx, ny).copy()
