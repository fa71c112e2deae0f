"""Piecewise analytic gradients with respect to the predicted box corners.

Branches are selected with the non-strict inequalities of the closed-form
derivation (``x1p >= x1t`` picks the first branch), so at a kink the
one-sided derivative of the closed side is returned.

When the predicted corner lies outside the target (``x1p < x1t``) the outer
corner ``x0`` moves with it. For pairs that overlap along the other axis the
contributions cancel, but for pairs separated along it they leave
``2 * (y1 - y2)``; ``(y_max - y_min) + (y1 - y2)`` covers both and is
exactly zero in the overlapping case.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import batch
from ._parallel import map_indices
from .boxes import SCALAR, Box, extended_terms
from .errors import EmptySample
from .losses import LossSpec


class Grad4(NamedTuple):
    d_x1p: float
    d_y1p: float
    d_x2p: float
    d_y2p: float


def ie_partials(xp, target, pred, g=None) -> Grad4:
    tx1, ty1, tx2, ty2 = target
    px1, py1, px2, py2 = pred
    if g is None:
        g = extended_terms(xp, target, pred)
    x_sep = g.x1 > g.x2
    y_sep = g.y1 > g.y2
    d_x1 = xp.where(
        px1 >= tx1,
        xp.where(x_sep, 2 * g.y0 - g.y_max - g.y1, g.y_min - g.y_max),
        (g.y_max - g.y_min) + (g.y1 - g.y2),
    )
    d_y1 = xp.where(
        py1 >= ty1,
        xp.where(y_sep, 2 * g.x0 - g.x_max - g.x1, g.x_min - g.x_max),
        (g.x_max - g.x_min) + (g.x1 - g.x2),
    )
    d_x2 = xp.where(
        px2 <= tx2,
        xp.where(x_sep, g.y2 + g.y_min - 2 * g.y0, g.y2 - g.y1),
        0.0 * g.y2,
    )
    d_y2 = xp.where(
        py2 <= ty2,
        xp.where(y_sep, g.x2 + g.x_min - 2 * g.x0, g.x2 - g.x1),
        0.0 * g.x2,
    )
    return Grad4(d_x1, d_y1, d_x2, d_y2)


def pred_area_partials(pred) -> Grad4:
    px1, py1, px2, py2 = pred
    return Grad4(py1 - py2, px1 - px2, py2 - py1, px2 - px1)


def ue_partials(xp, target, pred, g=None) -> Grad4:
    d_ie = ie_partials(xp, target, pred, g)
    d_sp = pred_area_partials(pred)
    return Grad4(*(s - i for s, i in zip(d_sp, d_ie)))


def loss_partials(xp, target, pred, loss: LossSpec, g=None):
    """Return ``(geometry, eiou, loss_value, Grad4)`` in one pass."""
    if g is None:
        g = extended_terms(xp, target, pred)
    d_ie = ie_partials(xp, target, pred, g)
    d_sp = pred_area_partials(pred)
    i_e, u_e = g.I_e, g.U_e
    e = i_e / u_e
    # dEIoU/dz = (dI * U - I * dU) / U^2 with dU = dSp - dI
    k = loss.slope(e) / (u_e * u_e)
    grad = Grad4(*(k * (di * u_e - i_e * (ds - di)) for di, ds in zip(d_ie, d_sp)))
    return g, e, loss.trace_value(e), grad


def grad_ie(target: Box, pred: Box) -> Grad4:
    return ie_partials(SCALAR, target, pred)


def grad_ue(target: Box, pred: Box) -> Grad4:
    return ue_partials(SCALAR, target, pred)


def grad_loss(target: Box, pred: Box, loss: LossSpec) -> Grad4:
    return loss_partials(SCALAR, target, pred, loss)[3]


def grad_smooth_eiou(target: Box, pred: Box, p: float = 2.0) -> Grad4:
    """Gradient of ``(1 - I_e/U_e) ** p``; zero exactly at coincident boxes."""
    return grad_loss(target, pred, LossSpec(power=p))


def grad_neg_eiou(target: Box, pred: Box) -> Grad4:
    """Gradient of the unconvexified ``-EIoU``; does not vanish at the optimum."""
    return grad_loss(target, pred, LossSpec(convex=False))


def finite_diff_grad(loss: Callable, pred, h: float = 1e-6) -> Grad4:
    """Central differences of ``loss(pred_tuple)`` in each coordinate.

    The step for coordinate ``z`` is ``h * max(1, |z|)``.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    base = [float(c) for c in pred]
    out = []
    for k in range(4):
        step = h * max(1.0, abs(base[k]))
        hi = list(base)
        lo = list(base)
        hi[k] += step
        lo[k] -= step
        out.append((loss(tuple(hi)) - loss(tuple(lo))) / (2 * step))
    return Grad4(*out)


def boundary_distance(target, pred) -> float:
    """Distance from the nearest kink of the piecewise formulas."""
    g = extended_terms(SCALAR, target, pred)
    return min(
        abs(pred[0] - target[0]),
        abs(pred[1] - target[1]),
        abs(pred[2] - target[2]),
        abs(pred[3] - target[3]),
        abs(g.x1 - g.x2),
        abs(g.y1 - g.y2),
    )


def relative_error(analytic, numeric, floor: float = 1e-3) -> float:
    """Max componentwise difference over the larger gradient's inf-norm.

    ``floor`` bounds the denominator from below so that an all-zero
    gradient is compared in absolute terms against finite-difference noise.
    """
    a = np.asarray(analytic, dtype=float)
    f = np.asarray(numeric, dtype=float)
    scale = max(np.abs(a).max(), np.abs(f).max(), floor)
    return float(np.abs(a - f).max() / scale)


def _ie_value(target, pred):
    return extended_terms(SCALAR, target, pred).I_e


def _ue_value(target, pred):
    return extended_terms(SCALAR, target, pred).U_e


def _loss_value(loss, target, pred):
    g = extended_terms(SCALAR, target, pred)
    return loss.value(g.I_e / g.U_e)


def _ie_grad(target, pred):
    return ie_partials(SCALAR, target, pred)


def _ue_grad(target, pred):
    return ue_partials(SCALAR, target, pred)


def _loss_grad(loss, target, pred):
    return loss_partials(SCALAR, target, pred, loss)[3]


def default_checks(loss: LossSpec | None = None) -> dict:
    """Name -> (analytic gradient fn, scalar value fn), both of (target, pred)."""
    loss = loss or LossSpec()
    return {
        "I_e": (_ie_grad, _ie_value),
        "U_e": (_ue_grad, _ue_value),
        "loss": (functools.partial(_loss_grad, loss), functools.partial(_loss_value, loss)),
    }


def sample_pair(seed: int, index: int, lo=-2.0, hi=2.0, h=1e-6, margin=10.0):
    """Draw a (target, pred) pair from the ``(seed, index)`` substream,
    redrawing until it is at least ``margin`` steps away from every kink."""
    rng = np.random.default_rng([seed, index])
    step = h * max(1.0, abs(lo), abs(hi))
    for _ in range(_MAX_REDRAWS):
        t, p = (tuple(map(float, b)) for b in batch.random_boxes(rng, 2, lo, hi))
        if boundary_distance(t, p) > margin * step:
            return t, p
    raise ValueError(f"step {h} is too large to keep samples clear of kinks in [{lo}, {hi}]")


_MAX_REDRAWS = 10_000


@dataclass
class GradcheckReport:
    samples: int
    max_rel_err: float
    mean_rel_err: float
    tol: float
    passed: bool
    per_check: dict
    worst: dict | None = None

    def to_json(self) -> str:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return json.dumps(d, indent=2, sort_keys=True)


def _check_one(seed, lo, hi, h, floor, checks, index):
    t, p = sample_pair(seed, index, lo, hi, h)
    errs = {}
    for name, (analytic, value) in checks.items():
        numeric = finite_diff_grad(functools.partial(value, t), p, h)
        errs[name] = relative_error(analytic(t, p), numeric, floor)
    return t, p, errs


def gradcheck_report(
    n_samples: int,
    seed: int = 0,
    tol: float = 1e-5,
    *,
    h: float = 1e-6,
    lo: float = -2.0,
    hi: float = 2.0,
    floor: float = 1e-3,
    checks: dict | None = None,
    workers: int = 1,
) -> GradcheckReport:
    """Compare analytic gradients with central differences on random pairs.

    ``checks`` defaults to I_e, U_e and the Smooth-EIoU loss; pass a custom
    mapping to check another analytic implementation.
    """
    if n_samples < 1:
        raise EmptySample("gradcheck needs at least one sample")
    checks = checks or default_checks()
    fn = functools.partial(_check_one, seed, lo, hi, h, floor, checks)
    results = map_indices(fn, n_samples, workers)

    per_check = {}
    all_errs = []
    worst = None
    for name in checks:
        errs = np.array([r[2][name] for r in results])
        per_check[name] = {"max_rel_err": float(errs.max()), "mean_rel_err": float(errs.mean())}
        all_errs.append(errs)
        i = int(errs.argmax())
        if worst is None or errs[i] > worst["rel_err"]:
            t, p, _ = results[i]
            worst = {"check": name, "index": i, "target": list(t), "pred": list(p), "rel_err": float(errs[i])}
    stacked = np.concatenate(all_errs)
    max_err = float(stacked.max())
    return GradcheckReport(
        samples=n_samples,
        max_rel_err=max_err,
        mean_rel_err=float(stacked.mean()),
        tol=tol,
        passed=bool(max_err < tol and math.isfinite(max_err)),
        per_check=per_check,
        worst=worst,
    )
