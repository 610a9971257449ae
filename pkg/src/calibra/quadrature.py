"""Quadrature along lines and over rectangles in (x, t)-space that respects field interfaces.

Interfaces are located as sign changes of the field's region gates: gate
values are sampled along each line, brackets are refined by vectorized
bisection, and Gauss-Legendre rules are applied between consecutive
breakpoints.
"""

from __future__ import annotations

import numpy as np

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _gates_fn(field):
    n = field.dim

    def fn(P):
        return field.level_sets(P[:, :n], P[:, n])

    return fn


def line_roots(gate_fn, p0, p1, samples=65, iters=55):
    """Sign changes of every gate along segments ``p0 -> p1``.

    Returns ``(line_index, s)`` arrays with ``s`` in ``(0, 1)``.
    """
    L, d = p0.shape
    s = np.linspace(0.0, 1.0, samples)
    pts = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
    vals = gate_fn(pts.reshape(-1, d))
    G = vals.shape[1]
    if G == 0:
        return np.zeros(0, int), np.zeros(0)
    neg = vals.reshape(L, samples, G) < 0
    li, sj, gk = np.nonzero(neg[:, 1:, :] != neg[:, :-1, :])
    if not len(li):
        return li, np.zeros(0)
    a, b = s[sj].copy(), s[sj + 1].copy()
    neg_a = neg[li, sj, gk]
    q0, dq = p0[li], (p1 - p0)[li]
    rows = np.arange(len(li))
    for _ in range(iters):
        m = 0.5 * (a + b)
        vm = gate_fn(q0 + m[:, None] * dq)[rows, gk] < 0
        same = vm == neg_a
        a = np.where(same, m, a)
        b = np.where(same, b, m)
    return li, 0.5 * (a + b)


def _segments(L, li, roots, extra=None):
    """Sorted knots per line -> segments ``(line, sa, sb)``."""
    lines = [np.arange(L), np.arange(L), li]
    knots = [np.zeros(L), np.ones(L), roots]
    if extra is not None:
        el, es = extra
        lines.append(el)
        knots.append(es)
    lines = np.concatenate(lines)
    knots = np.concatenate(knots)
    order = np.lexsort((knots, lines))
    lines, knots = lines[order], knots[order]
    same = lines[1:] == lines[:-1]
    return lines[:-1][same], knots[:-1][same], knots[1:][same]


def integrate_segments(fn, p0, p1, seg_line, sa, sb, panels=2):
    """Gauss-Legendre integral of ``fn`` over each sub-segment, returned per segment."""
    nseg = len(seg_line)
    length = np.linalg.norm(p1 - p0, axis=1)
    k = len(_GL_X)
    edges = sa[:, None] + (sb - sa)[:, None] * np.linspace(0, 1, panels + 1)[None, :]
    lo, hi = edges[:, :-1], edges[:, 1:]
    s = 0.5 * (lo + hi)[:, :, None] + 0.5 * (hi - lo)[:, :, None] * _GL_X[None, None, :]
    w = 0.5 * (hi - lo)[:, :, None] * _GL_W[None, None, :]
    s = s.reshape(nseg, -1)
    w = w.reshape(nseg, -1) * length[seg_line][:, None]
    P = p0[seg_line][:, None, :] + s[:, :, None] * (p1 - p0)[seg_line][:, None, :]
    vals = np.asarray(fn(P.reshape(-1, p0.shape[1])), float)
    vals = vals.reshape(nseg, panels * k, -1)
    return np.einsum("spm,sp->sm", vals, w)


def integrate_lines(fn, p0, p1, gate_fn=None, panels=2, samples=65):
    """Integral of ``fn`` (returning ``(P, m)``) along each segment ``p0 -> p1``."""
    p0 = np.atleast_2d(np.asarray(p0, float))
    p1 = np.atleast_2d(np.asarray(p1, float))
    L = p0.shape[0]
    if gate_fn is None:
        li, roots = np.zeros(0, int), np.zeros(0)
    else:
        li, roots = line_roots(gate_fn, p0, p1, samples)
    seg_line, sa, sb = _segments(L, li, roots)
    vals = integrate_segments(fn, p0, p1, seg_line, sa, sb, panels)
    out = np.zeros((L, vals.shape[1]))
    np.add.at(out, seg_line, vals)
    return out


def vertical_integrals(field, x, lo, hi, component="x", levels=None, panels=2):
    """Integrals of ``phi_x`` (or ``phi_t``) in t along vertical lines.

    Without ``levels`` returns ``(k, n)`` integrals over ``[lo, hi]``.  With
    ``levels`` (fractions in ``[0, 1]`` of each line, shape ``(q,)``) returns
    the cumulative integrals ``(k, q + r_i, n)`` as a list together with the
    knot t-values, where breakpoints found on each line are appended.
    """
    n = field.dim
    x = np.atleast_2d(np.asarray(x, float))
    k = x.shape[0]
    p0 = np.concatenate([x, lo[:, None]], 1)
    p1 = np.concatenate([x, hi[:, None]], 1)
    gate_fn = _gates_fn(field) if field.regions else None

    def fn(P):
        px, pt = field(P[:, :n], P[:, n])
        return px if component == "x" else pt[:, None]

    if gate_fn is None:
        li, roots = np.zeros(0, int), np.zeros(0)
        if levels is None:
            # no declared structure: fall back to many uniform panels
            panels = max(panels, 64)
    else:
        li, roots = line_roots(gate_fn, p0, p1)
    extra = None
    if levels is not None:
        q = len(levels)
        extra = (np.repeat(np.arange(k), q), np.tile(np.asarray(levels, float), k))
    seg_line, sa, sb = _segments(k, li, roots, extra)
    vals = integrate_segments(fn, p0, p1, seg_line, sa, sb, panels)
    if levels is None:
        out = np.zeros((k, vals.shape[1]))
        np.add.at(out, seg_line, vals)
        return out
    cum = np.cumsum(vals, axis=0)
    starts = np.searchsorted(seg_line, np.arange(k))
    ends = np.searchsorted(seg_line, np.arange(k), side="right")
    results, knots = [], []
    for i in range(k):
        s0, s1 = starts[i], ends[i]
        base = cum[s0 - 1] if s0 > 0 else np.zeros(vals.shape[1])
        c = np.vstack([np.zeros(vals.shape[1]), cum[s0:s1] - base])
        svals = np.concatenate([[sa[s0]], sb[s0:s1]])
        results.append(c)
        knots.append(lo[i] + svals * (hi[i] - lo[i]))
    return results, knots


def integrate_rect(fn, gate_fn, origin, e1, e2, l1, l2, grid=4, max_depth=7):
    """Integral of scalar ``fn`` over the rectangle ``origin + s e1 + r e2``.

    Cells crossed by a gate zero-set are integrated with a height-function
    rule: lines are taken along a direction in which every crossing gate is
    monotone, so each line meets each interface at most once and the outer
    integrand is smooth between the points where interfaces cross the cell
    edges.  Cells where no such direction exists are subdivided.
    """
    origin, e1, e2 = (np.asarray(v, float) for v in (origin, e1, e2))
    total = 0.0
    h1, h2 = l1 / grid, l2 / grid
    cells = [(i * h1, (i + 1) * h1, j * h2, (j + 1) * h2) for i in range(grid) for j in range(grid)]
    probe = np.linspace(0, 1, 7)
    P1, P2 = np.meshgrid(probe, probe, indexing="ij")

    def to_pts(s, r):
        return origin + s[:, None] * e1 + r[:, None] * e2

    def plain(c, ng=8):
        x, w = np.polynomial.legendre.leggauss(ng)
        s = c[0] + (c[1] - c[0]) * (x + 1) / 2
        r = c[2] + (c[3] - c[2]) * (x + 1) / 2
        S, R = np.meshgrid(s, r, indexing="ij")
        W = np.outer(w, w) * (c[1] - c[0]) * (c[3] - c[2]) / 4
        return float((fn(to_pts(S.ravel(), R.ravel())) * W.ravel()).sum())

    for depth in range(max_depth + 1):
        nxt = []
        for c in cells:
            s = c[0] + (c[1] - c[0]) * P1.ravel()
            r = c[2] + (c[3] - c[2]) * P2.ravel()
            g = gate_fn(to_pts(s, r)) if gate_fn is not None else np.zeros((len(s), 0))
            if g.shape[1] == 0:
                total += plain(c)
                continue
            g = g.reshape(7, 7, -1)
            crossing = np.any(g < 0, axis=(0, 1)) & np.any(g >= 0, axis=(0, 1))
            if not crossing.any():
                total += plain(c)
                continue
            gc = g[:, :, crossing]
            d1 = np.diff(gc, axis=0)
            d2 = np.diff(gc, axis=1)
            mono1 = np.all((d1 > 0).all(axis=(0, 1)) | (d1 < 0).all(axis=(0, 1)))
            mono2 = np.all((d2 > 0).all(axis=(0, 1)) | (d2 < 0).all(axis=(0, 1)))
            if depth == max_depth:
                total += plain(c, 16)
            elif mono1 or mono2:
                total += _height_rule(fn, gate_fn, to_pts, c, inner_first=mono1)
            else:
                sm, rm = 0.5 * (c[0] + c[1]), 0.5 * (c[2] + c[3])
                nxt += [(c[0], sm, c[2], rm), (sm, c[1], c[2], rm),
                        (c[0], sm, rm, c[3]), (sm, c[1], rm, c[3])]
        cells = nxt
        if not cells:
            break
    return total


def _height_rule(fn, gate_fn, to_pts, c, inner_first):
    # inner lines run along the monotone direction; outer breaks come from
    # roots on the two cell edges where those lines start and end
    s0, s1, r0, r1 = c
    if inner_first:
        edge_a = (to_pts(np.array([s0]), np.array([r0])), to_pts(np.array([s0]), np.array([r1])))
        edge_b = (to_pts(np.array([s1]), np.array([r0])), to_pts(np.array([s1]), np.array([r1])))
        o0, o1 = r0, r1
    else:
        edge_a = (to_pts(np.array([s0]), np.array([r0])), to_pts(np.array([s1]), np.array([r0])))
        edge_b = (to_pts(np.array([s0]), np.array([r1])), to_pts(np.array([s1]), np.array([r1])))
        o0, o1 = s0, s1
    p0 = np.vstack([edge_a[0], edge_b[0]])
    p1 = np.vstack([edge_a[1], edge_b[1]])
    _, roots = line_roots(gate_fn, p0, p1, samples=33)
    knots = np.unique(np.concatenate([[0.0, 1.0], roots]))
    xg, wg = np.polynomial.legendre.leggauss(8)
    outer, wout = [], []
    for a, b in zip(knots[:-1], knots[1:]):
        for pa, pb in ((a, 0.5 * (a + b)), (0.5 * (a + b), b)):
            outer.append(pa + (pb - pa) * (xg + 1) / 2)
            wout.append(wg * (pb - pa) / 2)
    o = o0 + (o1 - o0) * np.concatenate(outer)
    wo = (o1 - o0) * np.concatenate(wout)
    if inner_first:
        q0, q1 = to_pts(np.full_like(o, s0), o), to_pts(np.full_like(o, s1), o)
    else:
        q0, q1 = to_pts(o, np.full_like(o, r0)), to_pts(o, np.full_like(o, r1))
    inner = integrate_lines(lambda P: fn(P)[:, None], q0, q1, gate_fn, panels=2, samples=17)[:, 0]
    return float((inner * wo).sum())
