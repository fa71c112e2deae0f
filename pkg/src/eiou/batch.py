"""Vectorized numpy front-end over the shared box kernels.

All functions take ``(N, 4)`` float arrays of ``x1, y1, x2, y2`` rows and
return length-``N`` arrays. No validation is done here; callers generate
valid boxes (see :func:`random_boxes`).
"""

from __future__ import annotations

import numpy as np

from .boxes import extended_terms, giou_terms

# Integer codes for overlap classes, in :class:`~eiou.boxes.OverlapClass` order.
OVERLAPPING, TOUCHING, DISJOINT_X, DISJOINT_Y, DISJOINT_BOTH = range(5)


def _cols(a):
    a = np.asarray(a, dtype=np.float64)
    return a.T


def extended_geometry(targets, preds):
    return extended_terms(np, _cols(targets), _cols(preds))


def siou(targets, preds):
    g = extended_geometry(targets, preds)
    return g.I_std / g.U_std


def eiou(targets, preds):
    g = extended_geometry(targets, preds)
    return g.I_e / g.U_e


def giou(targets, preds):
    return giou_terms(np, _cols(targets), _cols(preds))


def classify_overlap(targets, preds):
    g = extended_geometry(targets, preds)
    apart_x = g.x1 > g.x2
    apart_y = g.y1 > g.y2
    touch = (g.x1 == g.x2) | (g.y1 == g.y2)
    out = np.full(apart_x.shape, OVERLAPPING, dtype=np.int8)
    out[touch] = TOUCHING
    out[apart_x & ~apart_y] = DISJOINT_X
    out[~apart_x & apart_y] = DISJOINT_Y
    out[apart_x & apart_y] = DISJOINT_BOTH
    return out


def random_boxes(rng, n, lo=0.0, hi=1.0, min_size=1e-3):
    """Draw ``n`` boxes with corners uniform in ``[lo, hi]``, sorted per axis.

    Draws whose width or height falls below ``min_size`` are rejected and
    redrawn, so ``hi - lo`` must exceed ``min_size``.
    """
    if hi - lo <= min_size:
        raise ValueError("coordinate range too narrow for the minimum box size")
    out = np.empty((n, 4))
    filled = 0
    while filled < n:
        need = n - filled
        xs = np.sort(rng.uniform(lo, hi, size=(need, 2)), axis=1)
        ys = np.sort(rng.uniform(lo, hi, size=(need, 2)), axis=1)
        ok = (xs[:, 1] - xs[:, 0] >= min_size) & (ys[:, 1] - ys[:, 0] >= min_size)
        k = int(ok.sum())
        out[filled:filled + k] = np.column_stack(
            [xs[ok, 0], ys[ok, 0], xs[ok, 1], ys[ok, 1]]
        )
        filled += k
    return out
