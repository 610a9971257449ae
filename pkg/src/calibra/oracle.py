"""Brute-force ground truth: exact 1D discrete minimization and 2D competitor families.

The discrete 1D energy on nodes ``x_i = i h`` with values on a uniform
level grid is

    E(u) = sum_i beta h w_i (u_i - g_i)^2 + sum_edges min((u_{i+1} - u_i)^2 / h, alpha)

with ``w_i = 1/2`` at the two end nodes and 1 elsewhere.  Accumulation
order is fixed (node 0, then edge and node alternately) in both the dynamic
program and the enumeration so their optima agree bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (Constant, JumpArc, JumpPoint, JumpSegment, SbvFunction, Sector, Span,
                   graph_window_contains)
from .errors import ConfigurationError, SizeError
from .expr import DiskBump, RampBlend, SineProduct, SineSeries, Sum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid1d:
    a: float
    N: int
    M: int
    v_min: float
    v_max: float
    dirichlet: Optional[tuple] = None
    window: object = None

    def __post_init__(self):
        if self.N < 1 or self.M < 2:
            raise ConfigurationError("need N >= 1 cells and M >= 2 levels")
        if not self.v_max > self.v_min:
            raise ConfigurationError("empty level range")
        if self.dirichlet is not None:
            for val in self.dirichlet:
                if not (self.v_min - 1e-12 <= val <= self.v_max + 1e-12):
                    raise ConfigurationError(f"Dirichlet value {val} outside level range")

    @property
    def h(self):
        return self.a / self.N

    @property
    def nodes(self):
        return np.linspace(0.0, self.a, self.N + 1)

    @property
    def levels(self):
        return np.linspace(self.v_min, self.v_max, self.M)

    def snap(self, value):
        """Index of the level nearest to ``value`` and the snapping error."""
        lv = self.levels
        j = int(np.argmin(np.abs(lv - value)))
        return j, abs(lv[j] - value)


@dataclass
class DpResult:
    values: np.ndarray
    indices: np.ndarray
    jumps: np.ndarray  # bool per edge
    energy: float
    snap_error: float = 0.0

    @property
    def jump_count(self):
        return int(self.jumps.sum())


def _costs(p, grid, g):
    lv = grid.levels
    h = grid.h
    diff2 = (lv[None, :] - lv[:, None]) ** 2 / h
    edge = np.minimum(diff2, p.alpha)
    jump = p.alpha < diff2
    w = np.ones(grid.N + 1)
    w[[0, -1]] = 0.5
    gi = np.zeros(grid.N + 1) if g is None else np.asarray(g, float).reshape(grid.N + 1)
    fid = p.beta * h * w[:, None] * (lv[None, :] - gi[:, None]) ** 2
    allowed = np.ones((grid.N + 1, grid.M), bool)
    if grid.window is not None:
        x = grid.nodes[:, None]
        allowed &= (grid.window.lower(x)[:, None] < lv[None, :]) & (lv[None, :] < grid.window.upper(x)[:, None])
    snap = 0.0
    if grid.dirichlet is not None:
        j0, e0 = grid.snap(grid.dirichlet[0])
        j1, e1 = grid.snap(grid.dirichlet[1])
        allowed[0] = False
        allowed[0, j0] = True
        allowed[-1] = False
        allowed[-1, j1] = True
        snap = max(e0, e1)
    fid = np.where(allowed, fid, np.inf)
    return edge, jump, fid, snap


def minimize_1d_dp(p, grid, g=None):
    """Exact minimizer of the discrete weak-membrane energy over the level grid."""
    edge, jump, fid, snap = _costs(p, grid, g)
    N, M = grid.N, grid.M
    cost = fid[0].copy()
    njump = np.zeros(M, dtype=np.int64)
    back = np.zeros((N, M), dtype=np.int64)
    big = np.iinfo(np.int64).max // 4
    for i in range(1, N + 1):
        cand = cost[:, None] + edge
        best = cand.min(axis=0)
        jc = np.where(cand == best[None, :], njump[:, None] + jump, big)
        k = np.argmin(jc, axis=0)
        back[i - 1] = k
        cols = np.arange(M)
        njump = njump[k] + jump[k, cols]
        cost = best + fid[i]
    cand_end = np.where(cost == cost.min(), njump, big)
    j = int(np.argmin(cand_end))
    energy = float(cost[j])
    if not math.isfinite(energy):
        raise ConfigurationError("no admissible discrete function (window too tight?)")
    idx = np.zeros(N + 1, dtype=np.int64)
    idx[N] = j
    for i in range(N, 0, -1):
        idx[i - 1] = back[i - 1, idx[i]]
    jumps = jump[idx[:-1], idx[1:]]
    return DpResult(grid.levels[idx], idx, jumps, energy, snap)


def enumerate_1d_bruteforce(p, grid, g=None, limit=10_000_000):
    """Exhaustive minimum over all level assignments (same accumulation order as the DP)."""
    if grid.M ** (grid.N + 1) > limit:
        raise SizeError(f"M^(N+1) = {grid.M ** (grid.N + 1)} exceeds {limit}")
    edge, _, fid, _ = _costs(p, grid, g)
    E = fid[0].copy()  # shape (..., M) with the last axis = current level
    for i in range(1, grid.N + 1):
        E = (E[..., :, None] + edge) + fid[i]
        E = E.reshape(-1, grid.M)
    return float(E.min())


def discrete_energy(p, grid, values, g=None):
    """Discrete energy of given node values (not restricted to the level grid)."""
    v = np.asarray(values, float)
    h = grid.h
    w = np.ones(grid.N + 1)
    w[[0, -1]] = 0.5
    gi = np.zeros(grid.N + 1) if g is None else np.asarray(g, float)
    e = float(p.beta * h * (w * (v - gi) ** 2).sum())
    e += float(np.minimum(np.diff(v) ** 2 / h, p.alpha).sum())
    return e


def sweep_threshold(p, a, lams, N=128, M=257):
    """DP optimum and jump count for Dirichlet data ``(0, lam a)`` over a list of slopes."""
    rows = []
    for lam in lams:
        top = lam * a
        grid = Grid1d(a, N, M, 0.0, top, dirichlet=(0.0, top))
        r = minimize_1d_dp(p, grid)
        rows.append((float(lam), r.energy, r.jump_count))
    return rows


# ---------------------------------------------------------------------------
# competitor families


def _perturb_1d(u, rng, amplitude, modes=4):
    pieces = []
    for region, ex in u.pieces:
        c = amplitude * rng.standard_normal(modes) / np.arange(1, modes + 1)
        pieces.append((region, Sum((ex, SineSeries(region.lo, region.hi, tuple(c))))))
    return replace(u, pieces=tuple(pieces))


def _perturb_2d(u, rng, amplitude):
    dom = u.domain
    if dom.kind == "disk":
        w = DiskBump(tuple(dom.center), dom.r, tuple(amplitude * rng.standard_normal(3) / dom.r ** 2))
    else:
        c = amplitude * rng.standard_normal((3, 3)) / np.arange(1, 4)[:, None] / np.arange(1, 4)[None, :]
        w = SineProduct(dom.lo, dom.hi, tuple(map(tuple, c)))
    pieces = tuple((r, Sum((e, w))) for r, e in u.pieces)
    jumps = []
    for j in u.jumps:
        jumps.append(replace(j, minus=Sum((j.minus, w)), plus=Sum((j.plus, w))))
    return replace(u, pieces=pieces, jumps=tuple(jumps))


def _jump_removal_1d(u, rng, delta):
    j = u.jumps[int(rng.integers(len(u.jumps)))]
    xl, xr = j.x - delta / 2, j.x + delta / 2
    vl = float(u.value(np.array([[xl]]))[0])
    vr = float(u.value(np.array([[xr]]))[0])
    pieces = []
    for region, ex in u.pieces:
        lo, hi = region.lo, region.hi
        if hi <= xl or lo >= xr:
            pieces.append((region, ex))
            continue
        if lo < xl:
            pieces.append((Span(lo, xl), ex))
        if hi > xr:
            pieces.append((Span(xr, hi), ex))
    pieces.append((Span(xl, xr), RampBlend(xl, xr, vl, vr)))
    pieces.sort(key=lambda pe: pe[0].lo)
    return SbvFunction(u.domain, tuple(pieces), tuple(k for k in u.jumps if k is not j))


def _jump_insertion_1d(u, rng, amplitude):
    region, ex = u.pieces[int(rng.integers(len(u.pieces)))]
    lo, hi = region.lo, region.hi
    xj = lo + (hi - lo) * (0.1 + 0.8 * rng.random())
    d = amplitude * (0.2 + rng.random()) * (1 if rng.random() < 0.5 else -1)
    right = Sum((ex, RampBlend(xj, hi, d, 0.0)))
    vl = float(ex.value(np.array([[xj]]))[0])
    lo_v, hi_v = min(vl, vl + d), max(vl, vl + d)
    jp = JumpPoint(xj, Constant(lo_v), Constant(hi_v), 1.0 if d > 0 else -1.0)
    pieces = [pe for pe in u.pieces if pe[0] is not region]
    pieces += [(Span(lo, xj), ex), (Span(xj, hi), right)]
    pieces.sort(key=lambda pe: pe[0].lo)
    return SbvFunction(u.domain, tuple(pieces), tuple(u.jumps) + (jp,))


def _jump_shift_1d(u, rng, amplitude):
    """Move a jump between two constant pieces."""
    j = u.jumps[int(rng.integers(len(u.jumps)))]
    i = next(k for k, (r, _) in enumerate(u.pieces) if abs(r.hi - j.x) < 1e-12)
    (rl, el), (rr, er) = u.pieces[i], u.pieces[i + 1]
    shift = amplitude * (2 * rng.random() - 1) * min(j.x - rl.lo, rr.hi - j.x)
    xn = j.x + shift
    pieces = list(u.pieces)
    pieces[i] = (Span(rl.lo, xn), el)
    pieces[i + 1] = (Span(xn, rr.hi), er)
    jumps = tuple(replace(k, x=xn) if k is j else k for k in u.jumps)
    return SbvFunction(u.domain, tuple(pieces), jumps)


def _junction_merge(u, rng, rho):
    """Inside ``B(0, rho)`` give one sector the value of its clockwise neighbour."""
    sectors = [(r, e) for r, e in u.pieces]
    k = len(sectors)
    i = int(rng.integers(k))
    keep = (i - 1) % k
    (ri, ei), (_, ek) = sectors[i], sectors[keep]
    vi, vk = ei.c, ek.c
    c = ri.center
    pieces = []
    for idx, (r, e) in enumerate(sectors):
        if idx == i:
            pieces.append((Sector(c, rho, r.r1, r.th0, r.th1), e))
            pieces.append((Sector(c, 0.0, rho, r.th0, r.th1), Constant(vk)))
        else:
            pieces.append((r, e))
    jumps = []
    th_start, th_end = ri.th0, ri.th1
    for j in u.jumps:
        d = np.subtract(j.p1, j.p0)
        th = math.atan2(d[1], d[0]) % (2 * math.pi)
        on_start = math.isclose(th, th_start % (2 * math.pi), abs_tol=1e-9)
        on_end = math.isclose(th, th_end % (2 * math.pi), abs_tol=1e-9)
        unit = d / np.linalg.norm(d)
        outer = tuple(np.asarray(c) + rho * unit)
        if on_start:
            # boundary between keep and i vanishes inside rho
            jumps.append(replace(j, p0=outer))
        elif on_end:
            jumps.append(replace(j, p0=outer))
            nxt = sectors[(i + 1) % k][1].c
            if nxt != vk:
                lo, hi = min(vk, nxt), max(vk, nxt)
                ccw = np.array([-unit[1], unit[0]])
                nrm = ccw if nxt > vk else -ccw
                jumps.append(JumpSegment(tuple(c), outer, Constant(lo), Constant(hi), tuple(nrm)))
        else:
            jumps.append(j)
    if vi != vk:
        lo, hi = min(vi, vk), max(vi, vk)
        jumps.append(JumpArc(tuple(c), rho, ri.th0, ri.th1, Constant(lo), Constant(hi), outward=vi > vk))
    return SbvFunction(u.domain, tuple(pieces), tuple(jumps))


FAMILIES = ("graph-perturbation", "jump-removal", "jump-insertion", "jump-shift", "junction-merge")


def generate_competitors(u, family, count, seed=0, amplitude=0.1, delta=0.01, rho_max=0.2, window=None):
    """Random competitors sharing the boundary trace of ``u``.

    Competitors whose graph leaves ``window`` are shrunk towards ``u`` a few
    times and skipped (with a log notice) if they still do not fit.
    """
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown competitor family {family!r}")
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < count and attempts < 10 * count + 10:
        attempts += 1
        amp = amplitude
        for _ in range(4):
            if family == "graph-perturbation":
                if amplitude == 0:
                    return [u] * count
                v = _perturb_1d(u, rng, amp) if u.dim == 1 else _perturb_2d(u, rng, amp)
            elif family == "jump-removal":
                if u.dim != 1 or not u.jumps:
                    raise ConfigurationError("jump-removal needs a 1D candidate with jumps")
                v = _jump_removal_1d(u, rng, delta)
            elif family == "jump-insertion":
                if u.dim != 1:
                    raise ConfigurationError("jump-insertion is one-dimensional")
                v = _jump_insertion_1d(u, rng, amp)
            elif family == "jump-shift":
                if u.dim != 1 or not u.jumps:
                    raise ConfigurationError("jump-shift needs a 1D candidate with jumps")
                v = _jump_shift_1d(u, rng, min(amp * 5, 0.9))
            else:
                if u.domain.kind != "disk" or not all(isinstance(r, Sector) for r, _ in u.pieces):
                    raise ConfigurationError("junction-merge needs a sector-constant candidate on a disk")
                v = _junction_merge(u, rng, rho_max * (0.2 + 0.8 * rng.random()) * u.domain.r)
            if window is None or graph_window_contains(window, v).contained:
                out.append(v)
                break
            amp *= 0.5
        else:
            log.info("competitor skipped: window too tight for %s", family)
    return out
