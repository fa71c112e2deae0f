import numpy as np
import pytest

from eiou.boxes import Box
from eiou.errors import ParseError
from eiou.optimizer import Mode
from eiou.scenarios import (
    Expectations,
    Oscillation,
    bundled_scenarios,
    check,
    find,
    first_reaching,
    parse_scenarios,
    proportional,
)

BUNDLED = bundled_scenarios()

MINIMAL = """format: eiou-scenarios/1
defaults: {alpha: 0.01}
scenarios:
  - name: a
    target: [0, 0, 1, 1]
    init: [0, 0, 0.5, 0.5]
"""


@pytest.mark.parametrize("scenario", BUNDLED, ids=lambda s: s.name)
def test_bundled_expectations_hold(scenario):
    verdicts = check(scenario.run(), scenario.expect)
    assert verdicts, "bundled scenarios should assert something"
    assert all(v.passed for v in verdicts), [v for v in verdicts if not v.passed]


def test_bundled_names_unique_and_complete():
    names = [s.name for s in BUNDLED]
    assert len(names) == len(set(names))
    for required in ("fig-convergence-smooth", "fig-convergence-raw", "fig-sot-trapped", "fig-sot-trapped-sot"):
        assert required in names


def test_bundled_share_one_rate():
    assert {s.cfg.alpha for s in BUNDLED} == {0.005}
    assert {s.cfg.max_iters for s in BUNDLED} == {5000}


def test_minimal_defaults():
    (s,) = parse_scenarios(MINIMAL)
    assert s.cfg.alpha == 0.01 and s.cfg.mode is Mode.SOT and s.cfg.max_iters == 5000
    assert s.expect == Expectations() and s.anchor is None


def test_per_scenario_override():
    text = MINIMAL + "    mode: plain\n    loss: neg-eiou:raw\n    max_iters: 7\n"
    (s,) = parse_scenarios(text)
    assert s.cfg.mode is Mode.PLAIN and not s.cfg.loss.convex and s.cfg.max_iters == 7


def test_anchor_rescales():
    sc = find(BUNDLED, "anchored-scale-4-sot")
    t, p = sc.unit_boxes()
    assert t == Box(0, 0, 1, 1) and p == Box(0, 0, 0.5, 0.5)
    assert np.array_equal(sc.run().eious, find(BUNDLED, "scale-1-sot").run().eious)


def test_proportional_helper():
    s = proportional(4, "plain", 0.005)
    assert s.target == Box(0, 0, 4, 4) and s.init == Box(0, 0, 2, 2) and s.cfg.mode is Mode.PLAIN


def test_first_reaching():
    tr = find(BUNDLED, "scale-1-plain").run()
    k = first_reaching(tr, 0.5)
    assert tr.eious[k] > 0.5 and (tr.eious[:k] <= 0.5).all()
    assert first_reaching(tr, 2.0) is None


def test_failed_expectation_reported():
    s = find(BUNDLED, "fig-sot-trapped")
    verdicts = check(s.run(), Expectations(converged=True, reaches_eiou=0.9, oscillation=Oscillation()))
    assert [v.passed for v in verdicts] == [False, False, False]


@pytest.mark.parametrize(
    "text, line",
    [
        (MINIMAL.replace("eiou-scenarios/1", "eiou-scenarios/9"), 1),
        (MINIMAL + "  - name: a\n    target: [0, 0, 1, 1]\n    init: [0, 0, 1, 1]\n", 7),
        (MINIMAL.replace("init: [0, 0, 0.5, 0.5]", "init: [0, 0, 0.5]"), 4),
        (MINIMAL.replace("init: [0, 0, 0.5, 0.5]", "init: [0, 0, 0, 0.5]"), 4),
        (MINIMAL + "    colour: red\n", 4),
        (MINIMAL + "    expect: {conveged: true}\n", 4),
        (MINIMAL + "    mode: sideways\n", 4),
        (MINIMAL + "    loss: neg-eiou:p=1\n", 4),
        (MINIMAL.replace("defaults: {alpha: 0.01}\n", ""), 3),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_scenarios(text)
    assert info.value.line == line


@pytest.mark.parametrize("text", ["[1, 2]", "format: eiou-scenarios/1\nscenarios: []\n",
                                  "format: eiou-scenarios/1\ndefaults: {colour: 1}\nscenarios: [{}]\n",
                                  "format: [\n"])
def test_malformed_files(text):
    with pytest.raises(ParseError):
        parse_scenarios(text)
