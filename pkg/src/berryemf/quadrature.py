"""Adaptive quadrature on straight segments and triangles.

Both engines work breadth-first: every round evaluates the integrand on all
still-active cells in one batched call, compares the coarse rule against
the sum over the two (segment) or four (triangle) children, and accepts a
cell when the difference is under its share of the absolute tolerance.
The share is proportional to the cell's length or area. Refinement also
stops as soon as the error estimates of all current cells sum to at most
``tol``; near a vortex core the node coordinates themselves carry roundoff
that no share-based rule can beat. Accepted values are summed with
``math.fsum`` in a fixed order, so results are deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import QuadratureFailure

GL_ORDER = 8
MAX_DEPTH = 40
# a segment cell may not be longer than this multiple of its distance to the
# nearest singular point; keeps near-core peaks from slipping between nodes
ADMISSIBILITY = 1.0
# cells whose estimates agree to a few ulps of the integral of |f| over the
# cell are done, whatever their share of the tolerance
_ROUNDOFF = 64 * np.finfo(float).eps

_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_ORDER)
_GL_NODES = 0.5 * (_gl_x + 1.0)
_GL_WEIGHTS = 0.5 * _gl_w


def _segment_rule(integrand, a, d, s0, s1):
    """Gauss-Legendre estimate of int_{s0}^{s1} integrand(a + s d) . d ds per cell."""
    h = s1 - s0
    s = s0[:, None] + h[:, None] * _GL_NODES[None, :]
    pts = a[:, None, :] + s[..., None] * d[:, None, :]
    vals = integrand(pts.reshape(-1, 2)).reshape(s.shape + (2,))
    proj = (vals * d[:, None, :]).sum(-1)
    return h * (proj @ _GL_WEIGHTS), np.abs(h) * (np.abs(proj) @ _GL_WEIGHTS)


def _piece_distance(a, d, s0, s1, sp):
    """Distance from each segment piece to its nearest singular point."""
    if sp.shape[0] == 0:
        return np.full(s0.shape, np.inf)
    p0 = a + s0[:, None] * d
    p1 = a + s1[:, None] * d
    e = p1 - p0
    ee = (e * e).sum(-1)
    rel = sp[None, :, :] - p0[:, None, :]
    t = np.clip((rel * e[:, None, :]).sum(-1) / np.where(ee > 0, ee, 1.0)[:, None], 0.0, 1.0)
    diff = rel - t[..., None] * e[:, None, :]
    return np.sqrt((diff * diff).sum(-1).min(1))


def polyline_integral(integrand, starts, ends, tol, singular_points=None,
                      max_depth: int = MAX_DEPTH) -> float:
    """Sum over segments of the line integral of a vector integrand.

    ``integrand`` maps ``(M, 2)`` points to ``(M, 2)`` vectors; segment ``k``
    runs from ``starts[k]`` to ``ends[k]``.
    """
    starts = np.asarray(starts, float).reshape(-1, 2)
    ends = np.asarray(ends, float).reshape(-1, 2)
    sp = np.empty((0, 2)) if singular_points is None else np.asarray(singular_points, float)
    d_all = ends - starts
    lengths = np.hypot(d_all[:, 0], d_all[:, 1])
    total_len = lengths.sum()
    if total_len == 0:
        return 0.0

    seg = np.arange(starts.shape[0])
    s0 = np.zeros(seg.size)
    s1 = np.ones(seg.size)
    coarse, _ = _segment_rule(integrand, starts[seg], d_all[seg], s0, s1)
    accepted: list[np.ndarray] = []
    err_done = 0.0
    depth = 0
    while seg.size:
        if depth > max_depth:
            raise QuadratureFailure(
                f"line integral did not reach tol={tol:g} within {max_depth} bisections")
        a, d = starts[seg], d_all[seg]
        mid = 0.5 * (s0 + s1)
        both, mag = _segment_rule(integrand, np.vstack([a, a]), np.vstack([d, d]),
                             np.concatenate([s0, mid]), np.concatenate([mid, s1]))
        left, right = both[:seg.size], both[seg.size:]
        fine = left + right
        piece_len = (s1 - s0) * lengths[seg]
        err = np.abs(fine - coarse)
        mag = mag[:seg.size] + mag[seg.size:]
        ok = (err <= tol * piece_len / total_len) | (err <= _ROUNDOFF * mag)
        if sp.shape[0]:
            ok &= piece_len <= ADMISSIBILITY * _piece_distance(a, d, s0, s1, sp)
        err_done += err[ok].sum()
        if err_done + err[~ok].sum() <= tol:
            accepted.append(fine)
            break
        accepted.append(fine[ok])
        keep = ~ok
        seg = np.concatenate([seg[keep], seg[keep]])
        s0, s1 = np.concatenate([s0[keep], mid[keep]]), np.concatenate([mid[keep], s1[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
        depth += 1
    return math.fsum(np.concatenate(accepted).tolist()) if accepted else 0.0


# collapsed (Duffy) tensor Gauss rule on the unit triangle; exact to degree 2n-2
_TRI_N = 6
_tx, _tw = np.polynomial.legendre.leggauss(_TRI_N)
_tx, _tw = 0.5 * (_tx + 1.0), 0.5 * _tw
_U, _V = np.meshgrid(_tx, _tx, indexing="ij")
_TRI_XI = np.stack([_U.ravel(), (_V * (1.0 - _U)).ravel()], axis=-1)
_TRI_W = (np.outer(_tw, _tw) * (1.0 - _U)).ravel()


def _triangle_rule(func, tris):
    p0, e1, e2 = tris[:, 0], tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]
    pts = (p0[:, None, :] + _TRI_XI[None, :, 0, None] * e1[:, None, :]
           + _TRI_XI[None, :, 1, None] * e2[:, None, :])
    vals = np.asarray(func(pts.reshape(-1, 2)), float).reshape(pts.shape[:2])
    jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return jac * (vals @ _TRI_W), jac * (np.abs(vals) @ _TRI_W)


def _split4(tris):
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.concatenate([np.stack(t, axis=1) for t in
                           ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))])


def triangles_integral(func, triangles, tol, max_depth: int = 20) -> float:
    """Adaptive integral of a scalar ``func`` over a union of triangles."""
    tris = np.asarray(triangles, float).reshape(-1, 3, 2)
    if tris.shape[0] == 0:
        return 0.0
    area = lambda t: 0.5 * np.abs((t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1])  # noqa: E731
                                  - (t[:, 1, 1] - t[:, 0, 1]) * (t[:, 2, 0] - t[:, 0, 0]))
    total = area(tris).sum()
    coarse, _ = _triangle_rule(func, tris)
    accepted: list[np.ndarray] = []
    err_done = 0.0
    depth = 0
    while tris.shape[0]:
        if depth > max_depth:
            raise QuadratureFailure(f"surface integral did not reach tol={tol:g}")
        n = tris.shape[0]
        kids = _split4(tris)
        kid_vals, kid_mag = _triangle_rule(func, kids)
        kid_vals = kid_vals.reshape(4, n)
        fine = kid_vals.sum(0)
        err = np.abs(fine - coarse)
        ok = (err <= tol * area(tris) / total) | (err <= _ROUNDOFF * kid_mag.reshape(4, n).sum(0))
        err_done += err[ok].sum()
        if err_done + err[~ok].sum() <= tol:
            accepted.append(fine)
            break
        accepted.append(fine[ok])
        keep = ~ok
        tris = kids.reshape(4, n, 3, 2)[:, keep].reshape(-1, 3, 2)
        coarse = kid_vals[:, keep].reshape(-1)
        depth += 1
    return math.fsum(np.concatenate(accepted).tolist())
