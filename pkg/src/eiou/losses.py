"""Loss functions built on the extended IoU.

The convexification transform turns any decreasing function of IoU into a
non-negative loss whose gradient vanishes at the optimum: shift the base by
its infimum, then raise to a power ``p > 1``. Smooth-EIoU is that transform
applied to ``-EIoU`` (infimum ``-1``), i.e. ``(1 - EIoU) ** p``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .boxes import Box, SCALAR, extended_terms
from .errors import DomainError, InvalidPower, ParseError


class Base(str, enum.Enum):
    NEG_EIOU = "neg-eiou"
    RECIPROCAL_IOU = "reciprocal-iou"
    NEG_LOG_IOU = "neg-log-iou"


# Infimum of each base over eiou in its valid domain (reached at eiou = 1).
_DEFAULT_MIN = {
    Base.NEG_EIOU: -1.0,
    Base.RECIPROCAL_IOU: 1.0,
    Base.NEG_LOG_IOU: 0.0,
}


@dataclass(frozen=True)
class LossSpec:
    """Which decreasing function of EIoU to use and how to convexify it.

    ``convex=False`` gives the raw base (no shift, no power); it exists to
    reproduce the non-vanishing gradient at the optimum.
    """

    base: Base = Base.NEG_EIOU
    power: float = 2.0
    base_min: float | None = None
    convex: bool = True

    def __post_init__(self):
        object.__setattr__(self, "base", Base(self.base))
        if self.base_min is None:
            object.__setattr__(self, "base_min", _DEFAULT_MIN[self.base])
        if self.convex and not self.power > 1:
            raise InvalidPower(f"power must exceed 1, got {self.power}")
        if self.base is Base.NEG_EIOU and not math.isfinite(self.base_min):
            raise DomainError("neg-eiou needs a finite minimum")

    @classmethod
    def parse(cls, text: str) -> "LossSpec":
        """Parse strings such as ``neg-eiou:p=2``, ``neg-eiou:raw`` or
        ``neg-log-iou:p=1.5,min=0``."""
        name, _, opts = text.strip().partition(":")
        try:
            base = Base(name.strip())
        except ValueError:
            raise ParseError(f"unknown loss base {name!r}") from None
        kwargs: dict = {"base": base}
        for item in filter(None, (o.strip() for o in opts.split(","))):
            key, eq, value = item.partition("=")
            try:
                if key == "raw" and not eq:
                    kwargs["convex"] = False
                elif key == "p" and eq:
                    kwargs["power"] = float(value)
                elif key == "min" and eq:
                    kwargs["base_min"] = float(value)
                else:
                    raise ValueError
            except ValueError:
                raise ParseError(f"bad loss option {item!r} in {text!r}") from None
        return cls(**kwargs)

    def __str__(self) -> str:
        if not self.convex:
            return f"{self.base.value}:raw"
        s = f"{self.base.value}:p={self.power:g}"
        if self.base_min != _DEFAULT_MIN[self.base]:
            s += f",min={self.base_min:g}"
        return s

    def base_value(self, e):
        """Base function of eiou; works elementwise on arrays."""
        if self.base is Base.NEG_EIOU:
            return -e
        _require_positive(e, self.base)
        if self.base is Base.RECIPROCAL_IOU:
            return 1.0 / e
        return -np.log(e)

    def base_slope(self, e):
        """Derivative of the base function with respect to eiou."""
        if self.base is Base.NEG_EIOU:
            return -1.0 + 0.0 * e
        _require_positive(e, self.base)
        if self.base is Base.RECIPROCAL_IOU:
            return -1.0 / (e * e)
        return -1.0 / e

    def value(self, e):
        b = self.base_value(e)
        if not self.convex:
            return b
        # rounding can push eiou a hair above 1 for coincident boxes;
        # multiplying by the mask clamps scalars and arrays alike
        shifted = b - self.base_min
        shifted = shifted * (shifted > 0)
        return shifted**self.power

    def trace_value(self, e):
        """Loss as recorded in traces: the raw base is shifted by its minimum
        so it is non-negative and comparable with the convexified curves."""
        if self.convex:
            return self.value(e)
        return self.base_value(e) - self.base_min

    def slope(self, e):
        """dLoss/dEIoU."""
        if not self.convex:
            return self.base_slope(e)
        shifted = self.base_value(e) - self.base_min
        shifted = shifted * (shifted > 0)
        return self.power * shifted ** (self.power - 1) * self.base_slope(e)


def _require_positive(e, base):
    if not np.all(np.asarray(e) > 0):
        raise DomainError(f"{base.value} is only defined for eiou > 0")


def convexify(base_value: float, base_min: float, p: float) -> float:
    """``(base_value - base_min) ** p``; zero exactly at the minimum."""
    if not p > 1:
        raise InvalidPower(f"power must exceed 1, got {p}")
    if base_value < base_min:
        raise DomainError(f"base value {base_value} is below its minimum {base_min}")
    return (base_value - base_min) ** p


def smooth_eiou_loss(target: Box, pred: Box, p: float = 2.0) -> float:
    g = extended_terms(SCALAR, target, pred)
    e = g.I_e / g.U_e
    # -eiou >= -1 up to rounding for coincident boxes
    return convexify(max(-e, -1.0), -1.0, p)


def focal_weight(target: Box, pred: Box) -> float:
    """The ``1 - EIoU`` factor that scales the Smooth-EIoU gradient."""
    g = extended_terms(SCALAR, target, pred)
    return 1.0 - g.I_e / g.U_e


def smooth_l1_loss(target_deltas: Sequence[float], pred_deltas: Sequence[float]) -> float:
    """Sum over coordinates of 0.5 d^2 for |d| < 1, else |d| - 0.5."""
    total = 0.0
    for t, q in zip(target_deltas, pred_deltas, strict=True):
        d = abs(q - t)
        total += 0.5 * d * d if d < 1.0 else d - 0.5
    return total


def _softplus(x: float) -> float:
    # log(1 + exp(x)) without overflow
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def _xlogy_ratio(q: float, log_q_p: float) -> float:
    return 0.0 if q == 0.0 else q * (math.log(q) - log_q_p)


@dataclass(frozen=True)
class IoUScorePair:
    q_g: float
    x: float = field(default=0.0)

    def __post_init__(self):
        if not 0.0 <= self.q_g <= 1.0:
            raise DomainError(f"ground-truth IoU score must lie in [0, 1], got {self.q_g}")
        if not math.isfinite(self.x):
            raise DomainError("head output must be finite")


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def kl_iou_loss(pair: IoUScorePair) -> float:
    """KL divergence between Bernoulli(q_g) and Bernoulli(sigmoid(x)), in nats."""
    log_qp = -_softplus(-pair.x)
    log_1mqp = -_softplus(pair.x)
    kl = _xlogy_ratio(pair.q_g, log_qp) + _xlogy_ratio(1.0 - pair.q_g, log_1mqp)
    # Gibbs: never negative; clamp the last-ulp rounding
    return max(kl, 0.0)
