"""Axis-aligned boxes and the standard, extended and generalized IoU metrics.

Boxes are ``(x1, y1, x2, y2)`` with ``(x1, y1)`` the top-left and ``(x2, y2)``
the bottom-right corner. The extended intersection ``I_e`` is a signed area:
it coincides with the ordinary intersection when the boxes overlap and turns
negative (growing in magnitude with separation) when they do not, so
``EIoU = I_e / U_e`` keeps a useful gradient for disjoint pairs.

The formulas here are written against a minimal array namespace ``xp``
(``minimum``, ``maximum``, ``where``) so the same code serves single boxes
(plain Python floats, see :data:`SCALAR`) and numpy batches (``xp = numpy``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Iterator, NamedTuple, Sequence

from .errors import DegenerateBox, NonFinite, ParseError


def _pick(cond, a, b):
    return a if cond else b


#: Array namespace for scalar (Python float) evaluation of the shared kernels.
SCALAR = SimpleNamespace(minimum=min, maximum=max, where=_pick)


@dataclass(frozen=True)
class Box:
    """Validated axis-aligned rectangle; construction enforces x1 < x2, y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        # numpy scalars in, plain floats out, so boxes serialize cleanly
        coords = tuple(float(c) for c in (self.x1, self.y1, self.x2, self.y2))
        for name, c in zip(("x1", "y1", "x2", "y2"), coords):
            object.__setattr__(self, name, c)
        if not all(math.isfinite(c) for c in coords):
            raise NonFinite(f"non-finite coordinate in {coords!r}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise DegenerateBox(
                f"box needs positive width and height, got {coords!r}"
            )

    def __iter__(self) -> Iterator[float]:
        return iter((self.x1, self.y1, self.x2, self.y2))

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def scaled(self, s: float) -> "Box":
        return Box(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def __str__(self) -> str:
        return format_box(self)


def validate(b) -> Box:
    """Return ``b`` as a :class:`Box`, raising if it is not a valid rectangle.

    Accepts an existing Box or any 4-sequence of numbers.
    """
    if isinstance(b, Box):
        return b
    coords = tuple(float(c) for c in b)
    if len(coords) != 4:
        raise ParseError(f"expected 4 coordinates, got {len(coords)}")
    return Box(*coords)


def parse_box(text: str) -> Box:
    """Parse the ``"x1,y1,x2,y2"`` literal used on the command line and in files."""
    parts = [p.strip() for p in text.strip().split(",")]
    if len(parts) != 4:
        raise ParseError(f"expected 'x1,y1,x2,y2', got {text.strip()!r}")
    try:
        coords = [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"non-numeric coordinate in {text.strip()!r}") from None
    return Box(*coords)


def format_box(b) -> str:
    return ",".join(f"{float(c):.17g}" for c in b)


class OverlapClass(str, enum.Enum):
    OVERLAPPING = "Overlapping"
    TOUCHING = "Touching"
    DISJOINT_X = "DisjointX"
    DISJOINT_Y = "DisjointY"
    DISJOINT_BOTH = "DisjointBoth"

    @property
    def is_disjoint(self) -> bool:
        return self in (
            OverlapClass.DISJOINT_X,
            OverlapClass.DISJOINT_Y,
            OverlapClass.DISJOINT_BOTH,
        )


class ExtendedGeometry(NamedTuple):
    """Every intermediate quantity of the extended-IoU construction.

    ``x1..y2`` are the (possibly inverted) intersection corners, ``x0, y0``
    the outer top-left corner, and ``x_min..y_max`` the sorted intersection
    coordinates. Fields hold floats for a single pair or arrays for a batch.
    """

    x1: float
    y1: float
    x2: float
    y2: float
    x0: float
    y0: float
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    I_std: float
    I_e: float
    S_t: float
    S_p: float
    U_std: float
    U_e: float


def extended_terms(xp, target, pred) -> ExtendedGeometry:
    tx1, ty1, tx2, ty2 = target
    px1, py1, px2, py2 = pred
    x1 = xp.maximum(tx1, px1)
    y1 = xp.maximum(ty1, py1)
    x2 = xp.minimum(tx2, px2)
    y2 = xp.minimum(ty2, py2)
    x0 = xp.minimum(tx1, px1)
    y0 = xp.minimum(ty1, py1)
    x_min = xp.minimum(x1, x2)
    y_min = xp.minimum(y1, y2)
    x_max = xp.maximum(x1, x2)
    y_max = xp.maximum(y1, y2)

    s1 = (x2 - x0) * (y2 - y0)
    s2 = (x_min - x0) * (y_min - y0)
    s3 = (x1 - x0) * (y_max - y0)
    s4 = (x_max - x0) * (y1 - y0)
    # grouped so the touching case cancels exactly (s1 == s3, s2 == s4)
    i_e = (s1 - s3) + (s2 - s4)

    i_std = xp.maximum(x2 - x1, 0.0) * xp.maximum(y2 - y1, 0.0)
    s_t = (tx2 - tx1) * (ty2 - ty1)
    s_p = (px2 - px1) * (py2 - py1)
    return ExtendedGeometry(
        x1, y1, x2, y2, x0, y0, x_min, y_min, x_max, y_max,
        I_std=i_std,
        I_e=i_e,
        S_t=s_t,
        S_p=s_p,
        U_std=s_t + s_p - i_std,
        U_e=s_t + s_p - i_e,
    )


def extended_geometry(target: Box, pred: Box) -> ExtendedGeometry:
    return extended_terms(SCALAR, target, pred)


def siou(target: Box, pred: Box) -> float:
    """Standard IoU; zero for pairs that do not overlap."""
    g = extended_terms(SCALAR, target, pred)
    return g.I_std / g.U_std


def eiou(target: Box, pred: Box) -> float:
    """Extended IoU in (-1, 1]: equals :func:`siou` for overlapping pairs,
    negative and decreasing with separation for disjoint ones."""
    g = extended_terms(SCALAR, target, pred)
    return g.I_e / g.U_e


def giou_terms(xp, target, pred):
    tx1, ty1, tx2, ty2 = target
    px1, py1, px2, py2 = pred
    g = extended_terms(xp, target, pred)
    enclose = (xp.maximum(tx2, px2) - xp.minimum(tx1, px1)) * (
        xp.maximum(ty2, py2) - xp.minimum(ty1, py1)
    )
    return g.I_std / g.U_std - (enclose - g.U_std) / enclose


def giou(target: Box, pred: Box) -> float:
    """Generalized IoU: SIoU minus the share of the enclosing box left uncovered."""
    return giou_terms(SCALAR, target, pred)


def classify_overlap(target: Box, pred: Box) -> OverlapClass:
    g = extended_terms(SCALAR, target, pred)
    apart_x = g.x1 > g.x2
    apart_y = g.y1 > g.y2
    if apart_x and apart_y:
        return OverlapClass.DISJOINT_BOTH
    if apart_x:
        return OverlapClass.DISJOINT_X
    if apart_y:
        return OverlapClass.DISJOINT_Y
    if g.x1 == g.x2 or g.y1 == g.y2:
        return OverlapClass.TOUCHING
    return OverlapClass.OVERLAPPING


@dataclass(frozen=True)
class AnchorEncoding:
    """Box expressed relative to an anchor, everything divided by sqrt(anchor area)."""

    scale: float
    normalized_anchor: tuple[float, float, float, float]
    deltas: tuple[float, float, float, float]


def anchor_scale(anchor: Box) -> float:
    return math.sqrt(anchor.area)


def encode(box: Box, anchor: Box) -> AnchorEncoding:
    s = anchor_scale(anchor)
    norm_anchor = tuple(c / s for c in anchor)
    deltas = tuple(b / s - a for b, a in zip(box, norm_anchor))
    return AnchorEncoding(scale=s, normalized_anchor=norm_anchor, deltas=deltas)


def decode_normalized(deltas: Sequence[float], anchor: Box) -> tuple[float, ...]:
    """Normalized predicted box: anchor/S + deltas."""
    s = anchor_scale(anchor)
    return tuple(a / s + d for a, d in zip(anchor, deltas))


def decode(enc: AnchorEncoding | Sequence[float], anchor: Box) -> Box:
    deltas = enc.deltas if isinstance(enc, AnchorEncoding) else enc
    s = anchor_scale(anchor)
    return Box(*(c * s for c in decode_normalized(deltas, anchor)))
