import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import boxes
from eiou.boxes import (
    Box,
    OverlapClass,
    classify_overlap,
    decode,
    encode,
    eiou,
    extended_geometry,
    format_box,
    giou,
    parse_box,
    siou,
)
from eiou.errors import DegenerateBox, NonFinite, ParseError


def ie_by_cases(t, p):
    """Extended intersection from the four per-case expansions, written out
    without the unified S1 + S2 - S3 - S4 form."""
    x1, y1 = max(t.x1, p.x1), max(t.y1, p.y1)
    x2, y2 = min(t.x2, p.x2), min(t.y2, p.y2)
    x0, y0 = min(t.x1, p.x1), min(t.y1, p.y1)
    lo_x, hi_x = sorted((x1, x2))
    lo_y, hi_y = sorted((y1, y2))
    if x1 <= x2 and y1 <= y2:
        return (x2 - x1) * (y2 - y1)
    if x1 > x2 and y1 <= y2:
        return -(hi_x - lo_x) * ((hi_y - y0) + (lo_y - y0))
    if x1 <= x2 and y1 > y2:
        return -(hi_y - lo_y) * ((hi_x - x0) + (lo_x - x0))
    return 2 * (lo_x - x0) * (lo_y - y0) - 2 * (hi_x - x0) * (hi_y - y0)


COUNTER_T = Box(0, 0, 1, 1)
COUNTER_P = Box(0.5, 0.5, 1.5, 1.5)


class TestBox:
    def test_valid(self):
        b = Box(0, 0, 2, 3)
        assert (b.width, b.height, b.area) == (2, 3, 6)
        assert tuple(b) == (0.0, 0.0, 2.0, 3.0)

    @pytest.mark.parametrize("coords", [(0, 0, 0, 1), (0, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0)])
    def test_degenerate(self, coords):
        with pytest.raises(DegenerateBox):
            Box(*coords)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(NonFinite):
            Box(0, 0, bad, 1)

    def test_coerces_to_float(self):
        import numpy as np

        b = Box(*np.array([0, 0, 1, 1]))
        assert all(type(c) is float for c in b)

    def test_parse_and_format(self):
        b = parse_box(" 0.1, -2 ,3,4.5 ")
        assert b == Box(0.1, -2, 3, 4.5)
        assert parse_box(format_box(b)) == b

    @pytest.mark.parametrize("text", ["0,0,1", "0,0,1,1,1", "a,0,1,1", ""])
    def test_parse_errors(self, text):
        with pytest.raises(ParseError):
            parse_box(text)

    def test_parse_degenerate(self):
        with pytest.raises(DegenerateBox):
            parse_box("0,0,0,1")

    @given(boxes())
    def test_format_roundtrip(self, b):
        assert parse_box(format_box(b)) == b


class TestGolden:
    def test_counterexample(self):
        g = extended_geometry(COUNTER_T, COUNTER_P)
        assert g.I_e == 0.25
        assert g.U_e == 1.75
        assert siou(COUNTER_T, COUNTER_P) == pytest.approx(1 / 7, abs=1e-12)
        assert eiou(COUNTER_T, COUNTER_P) == pytest.approx(1 / 7, abs=1e-12)
        assert giou(COUNTER_T, COUNTER_P) == pytest.approx(-5 / 63, abs=1e-12)

    def test_identical(self, unit):
        assert siou(unit, unit) == eiou(unit, unit) == giou(unit, unit) == 1.0

    def test_disjoint_along_x(self, unit):
        p = Box(2, 0, 3, 1)
        g = extended_geometry(unit, p)
        assert g.I_e == -1.0 and g.U_e == 3.0
        assert eiou(unit, p) == pytest.approx(-1 / 3, abs=1e-15)
        assert siou(unit, p) == 0.0

    def test_disjoint_both(self, unit):
        g = extended_geometry(unit, Box(2, 2, 3, 3))
        assert g.I_e == -6.0
        assert g.I_e / g.U_e == -0.75

    def test_touching_is_exactly_zero(self, unit):
        for p in (Box(1, 0, 2, 1), Box(0, 1, 1, 2), Box(1, 0.3, 2.7, 0.9), Box(1, 1, 2, 2)):
            assert eiou(unit, p) == 0.0
            assert classify_overlap(unit, p) is OverlapClass.TOUCHING

    def test_touching_pair_has_zero_giou(self, unit):
        assert giou(unit, Box(1, 0, 2, 1)) == 0.0

    @pytest.mark.parametrize(
        "pred, cls",
        [
            (Box(0.5, 0.5, 1.5, 1.5), OverlapClass.OVERLAPPING),
            (Box(2, 0, 3, 1), OverlapClass.DISJOINT_X),
            (Box(0, -3, 1, -2), OverlapClass.DISJOINT_Y),
            (Box(2, 2, 3, 3), OverlapClass.DISJOINT_BOTH),
        ],
    )
    def test_classes(self, unit, pred, cls):
        assert classify_overlap(unit, pred) is cls
        assert cls.is_disjoint == (eiou(unit, pred) < 0)


class TestAnchorEncoding:
    def test_roundtrip(self):
        anchor = Box(1, 2, 5, 6)
        b = Box(0.5, 1.5, 4, 7)
        enc = encode(b, anchor)
        assert enc.scale == 4.0
        back = decode(enc, anchor)
        assert tuple(back) == pytest.approx(tuple(b), abs=1e-12)

    def test_anchor_encodes_to_zero(self):
        a = Box(1, 2, 5, 6)
        assert encode(a, a).deltas == (0.0, 0.0, 0.0, 0.0)


class TestProperties:
    @given(boxes(), boxes())
    def test_matches_case_expansion(self, t, p):
        g = extended_geometry(t, p)
        assert g.I_e == pytest.approx(ie_by_cases(t, p), rel=1e-9, abs=1e-9)

    @given(boxes(), boxes())
    def test_sign_follows_overlap(self, t, p):
        e = eiou(t, p)
        cls = classify_overlap(t, p)
        if cls is OverlapClass.OVERLAPPING:
            assert e > 0 and e == pytest.approx(siou(t, p), abs=1e-12)
        elif cls is OverlapClass.TOUCHING:
            assert e == 0
        else:
            assert e < 0 and siou(t, p) == 0

    @given(boxes(), boxes())
    def test_range(self, t, p):
        assert -1 < eiou(t, p) <= 1
        assert giou(t, p) <= siou(t, p) + 1e-15

    @given(boxes(), boxes())
    def test_symmetric(self, t, p):
        assert eiou(t, p) == pytest.approx(eiou(p, t), abs=1e-12)

    @given(boxes(), boxes(), st.integers(min_value=-6, max_value=6))
    def test_power_of_two_scaling_is_exact(self, t, p, k):
        s = 2.0**k
        assert eiou(t.scaled(s), p.scaled(s)) == eiou(t, p)

    @given(boxes(), boxes(), st.floats(min_value=0.01, max_value=100))
    def test_scale_invariant(self, t, p, s):
        assert eiou(t.scaled(s), p.scaled(s)) == pytest.approx(eiou(t, p), abs=1e-9)

    @given(boxes(), st.floats(min_value=0.01, max_value=5), st.floats(min_value=0.01, max_value=5))
    def test_decreases_with_separation(self, t, gap, more):
        w = t.width
        near = Box(t.x2 + gap, t.y1, t.x2 + gap + w, t.y2)
        far = Box(t.x2 + gap + more, t.y1, t.x2 + gap + more + w, t.y2)
        assume(far.x1 > near.x1)
        assert eiou(t, far) < eiou(t, near) < 0
