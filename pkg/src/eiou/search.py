"""Random searches for pairs that expose weaknesses of other box losses.

``misalign`` looks for two predictions of one target where Smooth-l1 on
normalized corner offsets prefers the box with the lower IoU. ``giou_anomaly``
looks for an overlapping pair that GIoU scores below zero, and pairs it with
a touching pair that GIoU scores exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import batch
from .boxes import Box, eiou, giou, siou
from .errors import NotFound
from .losses import smooth_l1_loss

_CHUNK = 4096


@dataclass(frozen=True)
class SearchBudget:
    max_samples: int = 100_000
    seed: int = 0
    coordinate_range: tuple[float, float] = (0.0, 4.0)

    def __post_init__(self):
        lo, hi = self.coordinate_range
        if self.max_samples < 1:
            raise ValueError("max_samples must be at least 1")
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"bad coordinate range {self.coordinate_range}")


def _chunks(budget: SearchBudget):
    """Yield ``(offset, rng, size)``; chunk ``j`` uses substream ``(seed, j)``."""
    done = 0
    j = 0
    while done < budget.max_samples:
        size = min(_CHUNK, budget.max_samples - done)
        yield done, np.random.default_rng([budget.seed, j]), size
        done += size
        j += 1


def _draw(rng, size, lo, hi, min_size=1e-3, grid=None):
    """``size`` boxes as an (size, 4) array; rows that fail the size floor are NaN."""
    xy = rng.uniform(lo, hi, size=(size, 4))
    if grid:
        xy = np.round(xy / grid) * grid
    x = np.sort(xy[:, [0, 2]], axis=1)
    y = np.sort(xy[:, [1, 3]], axis=1)
    boxes = np.stack([x[:, 0], y[:, 0], x[:, 1], y[:, 1]], axis=1)
    ok = (x[:, 1] - x[:, 0] >= min_size) & (y[:, 1] - y[:, 0] >= min_size)
    boxes[~ok] = np.nan
    return boxes


def _smooth_l1_rows(d):
    a = np.abs(d)
    return np.where(a < 1.0, 0.5 * a * a, a - 0.5).sum(axis=1)


def _normalized_offsets(t, p):
    scale = np.sqrt((t[:, 2] - t[:, 0]) * (t[:, 3] - t[:, 1]))
    return (p - t) / scale[:, None]


def _plain_iou(t, p) -> float:
    """IoU from first principles, kept separate from the library kernels."""
    w = min(t[2], p[2]) - max(t[0], p[0])
    h = min(t[3], p[3]) - max(t[1], p[1])
    inter = w * h if w > 0 and h > 0 else 0.0
    union = (t[2] - t[0]) * (t[3] - t[1]) + (p[2] - p[0]) * (p[3] - p[1]) - inter
    return inter / union


def _plain_smooth_l1(t, p) -> float:
    s = math.sqrt((t[2] - t[0]) * (t[3] - t[1]))
    total = 0.0
    for a, b in zip(t, p):
        d = abs(b - a) / s
        total += 0.5 * d * d if d < 1.0 else d - 0.5
    return total


@dataclass
class MisalignWitness:
    target: Box
    pred_a: Box
    pred_b: Box
    l1_a: float
    l1_b: float
    iou_a: float
    iou_b: float
    samples_used: int
    verified: bool

    def to_dict(self) -> dict:
        return {
            "target": list(self.target),
            "pred_a": list(self.pred_a),
            "pred_b": list(self.pred_b),
            "smooth_l1_a": self.l1_a,
            "smooth_l1_b": self.l1_b,
            "iou_a": self.iou_a,
            "iou_b": self.iou_b,
            "samples_used": self.samples_used,
            "verified": self.verified,
        }


def verify_misalignment(target, pred_a, pred_b) -> bool:
    """``pred_a`` has both the larger Smooth-l1 loss and the larger IoU."""
    return (
        _plain_smooth_l1(target, pred_a) > _plain_smooth_l1(target, pred_b)
        and _plain_iou(target, pred_a) > _plain_iou(target, pred_b)
    )


def misalign(budget: SearchBudget = SearchBudget()) -> MisalignWitness:
    """Each sample is one (target, pred_a, pred_b) triple; draws rejected by
    the size floor still count against the budget."""
    lo, hi = budget.coordinate_range
    for offset, rng, size in _chunks(budget):
        t, a, b = (_draw(rng, size, lo, hi) for _ in range(3))
        valid = ~(np.isnan(t).any(1) | np.isnan(a).any(1) | np.isnan(b).any(1))
        with np.errstate(invalid="ignore"):
            la = _smooth_l1_rows(_normalized_offsets(t, a))
            lb = _smooth_l1_rows(_normalized_offsets(t, b))
            ia = batch.siou(t, a)
            ib = batch.siou(t, b)
        hit = np.flatnonzero(valid & (la > lb) & (ia > ib))
        for i in hit:
            tb, pa, pb = Box(*t[i]), Box(*a[i]), Box(*b[i])
            if not verify_misalignment(tuple(tb), tuple(pa), tuple(pb)):
                continue
            zero = (0.0,) * 4
            scale = math.sqrt(tb.area)
            return MisalignWitness(
                target=tb,
                pred_a=pa,
                pred_b=pb,
                l1_a=smooth_l1_loss(zero, [(q - c) / scale for q, c in zip(pa, tb)]),
                l1_b=smooth_l1_loss(zero, [(q - c) / scale for q, c in zip(pb, tb)]),
                iou_a=siou(tb, pa),
                iou_b=siou(tb, pb),
                samples_used=offset + int(i) + 1,
                verified=True,
            )
    raise NotFound(f"no misaligned pair in {budget.max_samples} samples")


@dataclass
class GIoUAnomaly:
    target: Box
    overlapping: Box
    touching: Box
    giou_overlapping: float
    siou_overlapping: float
    eiou_overlapping: float
    giou_touching: float
    eiou_touching: float
    samples_used: int

    def to_dict(self) -> dict:
        return {
            "target": list(self.target),
            "overlapping": {
                "pred": list(self.overlapping),
                "giou": self.giou_overlapping,
                "siou": self.siou_overlapping,
                "eiou": self.eiou_overlapping,
            },
            "touching": {"pred": list(self.touching), "giou": self.giou_touching, "eiou": self.eiou_touching},
            "samples_used": self.samples_used,
        }


# Draws snap to a dyadic grid so areas of the touching pair are exact.
_GRID = 2.0**-8


def giou_anomaly(budget: SearchBudget = SearchBudget()) -> GIoUAnomaly:
    """Find an overlapping pair with giou < 0 (and check eiou > 0 for it),
    then build the touching pair that shares the target's right edge."""
    lo, hi = budget.coordinate_range
    for offset, rng, size in _chunks(budget):
        t = _draw(rng, size, lo, hi, grid=_GRID)
        p = _draw(rng, size, lo, hi, grid=_GRID)
        valid = ~(np.isnan(t).any(1) | np.isnan(p).any(1))
        with np.errstate(invalid="ignore"):
            overlapping = batch.classify_overlap(t, p) == batch.OVERLAPPING
            g = batch.giou(t, p)
        hit = np.flatnonzero(valid & overlapping & (g < 0))
        for i in hit:
            tb, pb = Box(*t[i]), Box(*p[i])
            if not (_plain_iou(tuple(tb), tuple(pb)) > 0 and eiou(tb, pb) > 0):
                continue
            touch = Box(tb.x2, tb.y1, tb.x2 + pb.width, tb.y2)
            return GIoUAnomaly(
                target=tb,
                overlapping=pb,
                touching=touch,
                giou_overlapping=giou(tb, pb),
                siou_overlapping=siou(tb, pb),
                eiou_overlapping=eiou(tb, pb),
                giou_touching=giou(tb, touch),
                eiou_touching=eiou(tb, touch),
                samples_used=offset + int(i) + 1,
            )
    raise NotFound(f"no overlapping pair with negative GIoU in {budget.max_samples} samples")
