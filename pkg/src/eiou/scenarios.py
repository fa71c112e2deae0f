"""Scenario files: named optimization setups with checkable expectations.

Grammar (YAML, tagged ``format: eiou-scenarios/1``)::

    format: eiou-scenarios/1
    defaults:            # optional, merged into every scenario
      alpha: 0.005
      max_iters: 5000
      loss_tol: 1.0e-6
      mode: sot          # sot | plain
      loss: neg-eiou:p=2 # see LossSpec.parse
    scenarios:
      - name: smooth     # unique within the file
        target: [0, 0, 1, 1]
        init: [0, 0, 0.5, 0.5]
        anchor: [0, 0, 2, 2]   # optional: optimize in sqrt(anchor area) units
        expect:                # every key optional
          converged: true
          final_loss_below: 1.0e-6
          iterations_at_most: 1000
          oscillation: {window: 100, min_range: 0.01}
          reaches_eiou: 0.9
          max_eiou_below: 0.9
          monotone: true       # loss never rises by more than 1e-12
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .boxes import Box, anchor_scale
from .errors import EIoUError, ParseError
from .losses import LossSpec
from .optimizer import Mode, OptimConfig, Trace, run

FORMAT_TAG = "eiou-scenarios/1"
MONOTONE_SLACK = 1e-12

_CFG_KEYS = {"alpha", "max_iters", "loss_tol", "mode", "loss"}
_SCENARIO_KEYS = _CFG_KEYS | {"name", "target", "init", "anchor", "expect", "description"}
_EXPECT_KEYS = {
    "converged", "final_loss_below", "iterations_at_most", "oscillation",
    "reaches_eiou", "max_eiou_below", "monotone",
}


@dataclass(frozen=True)
class Oscillation:
    window: int = 100
    min_range: float = 0.01


@dataclass(frozen=True)
class Expectations:
    converged: bool | None = None
    final_loss_below: float | None = None
    iterations_at_most: int | None = None
    oscillation: Oscillation | None = None
    reaches_eiou: float | None = None
    max_eiou_below: float | None = None
    monotone: bool | None = None


@dataclass(frozen=True)
class Verdict:
    check: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class Scenario:
    name: str
    target: Box
    init: Box
    cfg: OptimConfig
    anchor: Box | None = None
    expect: Expectations = field(default_factory=Expectations)
    description: str = ""

    def unit_boxes(self) -> tuple[Box, Box]:
        """Target and init in the coordinates the optimizer sees."""
        if self.anchor is None:
            return self.target, self.init
        s = 1.0 / anchor_scale(self.anchor)
        return self.target.scaled(s), self.init.scaled(s)

    def run(self) -> Trace:
        target, init = self.unit_boxes()
        return run(target, init, self.cfg)


def check(trace: Trace, expect: Expectations) -> list[Verdict]:
    losses = trace.losses
    eious = trace.eious
    iters = len(trace) - 1
    out = []
    if expect.converged is not None:
        ok = trace.converged == expect.converged
        out.append(Verdict("converged", ok, f"converged={trace.converged} after {iters} iterations"))
    if expect.final_loss_below is not None:
        v = float(losses[-1])
        out.append(Verdict("final_loss_below", v < expect.final_loss_below, f"final loss {v:.6g}"))
    if expect.iterations_at_most is not None:
        out.append(Verdict("iterations_at_most", iters <= expect.iterations_at_most, f"{iters} iterations"))
    if expect.oscillation is not None:
        w = expect.oscillation.window
        tail = losses[-w:]
        rng = float(tail.max() - tail.min())
        ok = len(losses) >= w and rng > expect.oscillation.min_range
        out.append(Verdict("oscillation", ok, f"loss range {rng:.6g} over last {len(tail)} records"))
    if expect.reaches_eiou is not None:
        hit = next((k for k, e in enumerate(eious) if e > expect.reaches_eiou), None)
        detail = f"eiou > {expect.reaches_eiou:g} at iteration {hit}" if hit is not None else f"max eiou {eious.max():.6g}"
        out.append(Verdict("reaches_eiou", hit is not None, detail))
    if expect.max_eiou_below is not None:
        m = float(eious.max())
        out.append(Verdict("max_eiou_below", m < expect.max_eiou_below, f"max eiou {m:.6g}"))
    if expect.monotone is not None:
        worst = float((losses[1:] - losses[:-1]).max()) if len(losses) > 1 else 0.0
        ok = (worst <= MONOTONE_SLACK) == expect.monotone
        out.append(Verdict("monotone", ok, f"largest single-step increase {worst:.3g}"))
    return out


def first_reaching(trace: Trace, threshold: float) -> int | None:
    """Iteration at which eiou first exceeds ``threshold``."""
    return next((k for k, e in enumerate(trace.eious) if e > threshold), None)


# --- loading -----------------------------------------------------------------


def _box(value, where: str, line) -> Box:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ParseError(f"{where}: expected a list of four numbers", line=line)
    try:
        return Box(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}", line=line) from None


def _expectations(raw, where: str, line) -> Expectations:
    if raw is None:
        return Expectations()
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expect must be a mapping", line=line)
    unknown = set(raw) - _EXPECT_KEYS
    if unknown:
        raise ParseError(f"{where}: unknown expectation(s) {sorted(unknown)}", line=line)
    kw = dict(raw)
    try:
        if "oscillation" in kw:
            kw["oscillation"] = Oscillation(**(kw["oscillation"] or {}))
        for key in ("final_loss_below", "reaches_eiou", "max_eiou_below"):
            if key in kw:
                kw[key] = float(kw[key])
        if "iterations_at_most" in kw:
            kw["iterations_at_most"] = int(kw["iterations_at_most"])
        return Expectations(**kw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad expectation: {exc}", line=line) from None


def _config(raw: dict, where: str, line) -> OptimConfig:
    try:
        return OptimConfig(
            alpha=float(raw["alpha"]),
            max_iters=int(raw.get("max_iters", 5000)),
            loss_tol=float(raw.get("loss_tol", 1e-6)),
            mode=Mode(raw.get("mode", "sot")),
            loss=LossSpec.parse(str(raw.get("loss", "neg-eiou:p=2"))),
        )
    except KeyError:
        raise ParseError(f"{where}: alpha is required", line=line) from None
    except (EIoUError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}", line=line) from None


def _item_lines(text: str) -> list[int | None]:
    """1-based start line of each entry in the ``scenarios`` sequence."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return []
    if not isinstance(root, yaml.MappingNode):
        return []
    for key, value in root.value:
        if key.value == "scenarios" and isinstance(value, yaml.SequenceNode):
            return [item.start_mark.line + 1 for item in value.value]
    return []


def parse_scenarios(text: str) -> list[Scenario]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    if not isinstance(doc, dict):
        raise ParseError("scenario file must be a mapping")
    if doc.get("format") != FORMAT_TAG:
        raise ParseError(f"missing or unsupported format tag (expected {FORMAT_TAG!r})", line=1)
    defaults = doc.get("defaults") or {}
    if not isinstance(defaults, dict) or set(defaults) - _CFG_KEYS:
        raise ParseError(f"defaults may only set {sorted(_CFG_KEYS)}")
    items = doc.get("scenarios")
    if not isinstance(items, list) or not items:
        raise ParseError("scenarios must be a non-empty list")
    lines = _item_lines(text) or [None] * len(items)

    out: list[Scenario] = []
    seen: set[str] = set()
    for i, (item, line) in enumerate(zip(items, lines)):
        where = f"scenario #{i + 1}"
        if not isinstance(item, dict):
            raise ParseError(f"{where}: must be a mapping", line=line)
        unknown = set(item) - _SCENARIO_KEYS
        if unknown:
            raise ParseError(f"{where}: unknown key(s) {sorted(unknown)}", line=line)
        name = item.get("name")
        if not isinstance(name, str) or not name:
            raise ParseError(f"{where}: name is required", line=line)
        where = f"scenario {name!r}"
        if name in seen:
            raise ParseError(f"{where}: duplicate name", line=line)
        seen.add(name)
        merged = {**defaults, **{k: v for k, v in item.items() if k in _CFG_KEYS}}
        out.append(
            Scenario(
                name=name,
                target=_box(item.get("target"), f"{where} target", line),
                init=_box(item.get("init"), f"{where} init", line),
                cfg=_config(merged, where, line),
                anchor=_box(item["anchor"], f"{where} anchor", line) if "anchor" in item else None,
                expect=_expectations(item.get("expect"), where, line),
                description=str(item.get("description", "")),
            )
        )
    return out


def load_scenarios(path: str | Path) -> list[Scenario]:
    return parse_scenarios(Path(path).read_text())


def bundled_text() -> str:
    return resources.files("eiou").joinpath("data/scenarios.yaml").read_text()


def bundled_scenarios() -> list[Scenario]:
    return parse_scenarios(bundled_text())


def find(scenarios: list[Scenario], name: str) -> Scenario:
    for s in scenarios:
        if s.name == name:
            return s
    raise KeyError(f"no scenario named {name!r}")


def proportional(scale: float, mode: Mode | str, alpha: float, *, max_iters: int = 5000) -> Scenario:
    """Target (0,0,s,s) with init (0,0,s/2,s/2), for scale comparisons."""
    return Scenario(
        name=f"scale-{scale:g}-{Mode(mode).value}",
        target=Box(0.0, 0.0, scale, scale),
        init=Box(0.0, 0.0, scale / 2, scale / 2),
        cfg=OptimConfig(alpha=alpha, max_iters=max_iters, mode=mode),
    )

