"""Gradient descent on predicted box corners, plain or scale-steady.

The scale-steady (SOT) update multiplies the loss gradient by the extended
union ``U_e`` before stepping. The loss gradient of an IoU-type loss scales
as 1/size while ``U_e`` scales as size**2, so the SOT step is proportional to
box size and an entire trajectory is equivariant under uniform scaling.
Plain descent takes steps that shrink as boxes grow.
"""

from __future__ import annotations

import csv
import enum
import functools
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from . import batch
from ._parallel import map_indices
from .boxes import SCALAR, Box
from .errors import DegenerateBox, DegenerateStep, EmptySample
from .gradients import Grad4, loss_partials
from .losses import LossSpec


class Mode(str, enum.Enum):
    PLAIN = "plain"
    SOT = "sot"


@dataclass(frozen=True)
class OptimConfig:
    alpha: float
    max_iters: int = 5000
    loss_tol: float = 1e-6
    mode: Mode = Mode.SOT
    loss: LossSpec = field(default_factory=LossSpec)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.alpha > 0:
            raise ValueError(f"learning rate must be positive, got {self.alpha}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.loss_tol < 0:
            raise ValueError("loss_tol must be non-negative")


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    pred: Box
    I_e: float
    U_e: float
    eiou: float
    loss: float
    grad: Grad4
    step_norm: float


TRACE_FIELDS = (
    "iter", "x1", "y1", "x2", "y2", "ie", "ue", "eiou", "loss",
    "gx1", "gy1", "gx2", "gy2", "step_norm",
)


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return f"{float(v):.17g}"


@dataclass
class Trace:
    """Per-iteration records; record 0 is the initial state.

    ``step_norm`` of record k is the Euclidean length of the update that
    produced it (0 for the initial record).
    """

    target: Box
    config: OptimConfig
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def eious(self) -> np.ndarray:
        return np.array([r.eiou for r in self.records])

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def converged(self) -> bool:
        return self.final.loss <= self.config.loss_tol

    def rows(self) -> Iterable[tuple]:
        for r in self.records:
            yield (r.iter, *r.pred, r.I_e, r.U_e, r.eiou, r.loss, *r.grad, r.step_norm)

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for row in self.rows():
            w.writerow([_fmt(v) for v in row])

    def write_jsonl(self, fh: IO[str]) -> None:
        for row in self.rows():
            # 17 significant digits round-trips every float64 exactly
            obj = {k: (v if isinstance(v, int) else float(_fmt(v))) for k, v in zip(TRACE_FIELDS, row)}
            fh.write(json.dumps(obj) + "\n")


def _take_step(target: Box, pred: Box, alpha: float, loss: LossSpec, sot: bool) -> Box:
    g, _, _, grad = loss_partials(SCALAR, target, pred, loss)
    rate = alpha * g.U_e if sot else alpha
    try:
        return Box(*(z - rate * d for z, d in zip(pred, grad)))
    except DegenerateBox as exc:
        raise DegenerateStep(f"update left the valid box domain: {exc}") from exc


def step_plain(target: Box, pred: Box, alpha: float, loss: LossSpec | None = None) -> Box:
    """``pred - alpha * grad``."""
    return _take_step(target, pred, alpha, loss or LossSpec(), sot=False)


def step_sot(target: Box, pred: Box, alpha: float, loss: LossSpec | None = None) -> Box:
    """``pred - alpha * U_e * grad``: plain descent at rate ``alpha * U_e``."""
    return _take_step(target, pred, alpha, loss or LossSpec(), sot=True)


def run(target: Box, init: Box, cfg: OptimConfig) -> Trace:
    """Iterate until the loss reaches ``cfg.loss_tol`` or ``cfg.max_iters``
    updates have been applied."""
    trace = Trace(target=target, config=cfg)
    sot = cfg.mode is Mode.SOT
    pred = init
    step_norm = 0.0
    for k in range(cfg.max_iters + 1):
        g, e, value, grad = loss_partials(SCALAR, target, pred, cfg.loss)
        trace.records.append(TraceRecord(k, pred, g.I_e, g.U_e, e, value, grad, step_norm))
        if value <= cfg.loss_tol or k == cfg.max_iters:
            break
        rate = cfg.alpha * g.U_e if sot else cfg.alpha
        delta = [rate * d for d in grad]
        try:
            pred = Box(*(z - d for z, d in zip(pred, delta)))
        except DegenerateBox as exc:
            raise DegenerateStep(f"iteration {k + 1}: {exc}", trace=trace) from exc
        step_norm = math.sqrt(sum(d * d for d in delta))
    return trace


@dataclass
class BatchRun:
    """Outcome of :func:`run_batch`; every array has one entry per pair."""

    final: np.ndarray
    eiou: np.ndarray
    loss: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    degenerate: np.ndarray
    max_increase: np.ndarray
    first_violation: np.ndarray
    history: np.ndarray | None = None


def run_batch(targets, inits, cfg: OptimConfig, *, slack: float = 1e-12, keep_history: bool = False) -> BatchRun:
    """Vectorized :func:`run` over many independent pairs.

    Also tracks monotonicity: ``first_violation[i]`` is the first update index
    after which the loss rose by more than ``slack`` (-1 if never).
    """
    t = np.asarray(targets, dtype=np.float64)
    p = np.array(inits, dtype=np.float64)
    n = len(t)
    sot = cfg.mode is Mode.SOT
    tcols = t.T
    active = np.ones(n, dtype=bool)
    iterations = np.zeros(n, dtype=np.int64)
    degenerate = np.zeros(n, dtype=bool)
    max_inc = np.full(n, -np.inf)
    first_violation = np.full(n, -1, dtype=np.int64)
    prev_loss = np.full(n, np.inf)
    history = np.full((cfg.max_iters + 1, n), np.nan) if keep_history else None
    e = value = None

    for k in range(cfg.max_iters + 1):
        g, e_k, value_k, grad = loss_partials(np, tcols, p.T, cfg.loss)
        # frozen rows keep their last evaluated state
        e = e_k if e is None else np.where(active, e_k, e)
        value = value_k if value is None else np.where(active, value_k, value)
        if keep_history:
            history[k, active] = value_k[active]
        if k > 0:
            inc = np.where(active, value_k - prev_loss, -np.inf)
            max_inc = np.maximum(max_inc, inc)
            bad = active & (inc > slack) & (first_violation < 0)
            first_violation[bad] = k
        prev_loss = np.where(active, value_k, prev_loss)
        active &= value_k > cfg.loss_tol
        if k == cfg.max_iters or not active.any():
            break
        rate = cfg.alpha * g.U_e if sot else cfg.alpha
        new = p - (rate * np.stack(grad)).T
        ok = (new[:, 2] > new[:, 0]) & (new[:, 3] > new[:, 1]) & np.isfinite(new).all(axis=1)
        broke = active & ~ok
        degenerate |= broke
        active &= ok
        p[active] = new[active]
        iterations[active] += 1

    return BatchRun(
        final=p,
        eiou=e,
        loss=value,
        iterations=iterations,
        converged=value <= cfg.loss_tol,
        degenerate=degenerate,
        max_increase=max_inc,
        first_violation=first_violation,
        history=history,
    )


def random_pairs(seed: int, n: int, lo: float = 0.0, hi: float = 4.0, min_size: float = 1e-3):
    """``n`` (target, init) pairs, pair ``i`` drawn from substream ``(seed, i)``."""
    targets = np.empty((n, 4))
    inits = np.empty((n, 4))
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        targets[i], inits[i] = batch.random_boxes(rng, 2, lo, hi, min_size)
    return targets, inits


@dataclass
class Theorem1Report:
    trials: int
    alpha: float
    max_iters: int
    slack: float
    violations: int
    violating_trials: list[int]
    worst_increase: float
    degenerate: int
    converged: int
    offending: dict | None = None
    offending_trace: Trace | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "alpha": self.alpha,
            "max_iters": self.max_iters,
            "slack": self.slack,
            "violations": self.violations,
            "violating_trials": self.violating_trials[:20],
            "worst_increase": self.worst_increase,
            "degenerate": self.degenerate,
            "converged": self.converged,
            "offending": self.offending,
            "pass": self.passed,
        }


def theorem1_check(
    trials: int,
    seed: int = 0,
    alpha: float = 1e-3,
    *,
    max_iters: int = 5000,
    loss_tol: float = 1e-6,
    slack: float = 1e-12,
    loss: LossSpec | None = None,
    lo: float = 0.0,
    hi: float = 1.0,
) -> Theorem1Report:
    """Run SOT on random pairs and count trials whose loss ever increases.

    The first offending trial is re-run with the scalar optimizer and its
    trace attached to the report. Trials whose update leaves the valid box
    domain stop there and are counted under ``degenerate``.
    """
    if trials < 1:
        raise EmptySample("theorem1_check needs at least one trial")
    cfg = OptimConfig(alpha=alpha, max_iters=max_iters, loss_tol=loss_tol, mode=Mode.SOT, loss=loss or LossSpec())
    targets, inits = random_pairs(seed, trials, lo, hi)
    return _theorem1_from(targets, inits, cfg, slack)


def _theorem1_from(targets, inits, cfg: OptimConfig, slack: float) -> Theorem1Report:
    res = run_batch(targets, inits, cfg, slack=slack)
    bad = np.flatnonzero(res.first_violation >= 0)
    offending = None
    offending_trace = None
    if bad.size:
        i = int(bad[0])
        t, p0 = Box(*targets[i]), Box(*inits[i])
        try:
            offending_trace = run(t, p0, cfg)
        except DegenerateStep as exc:
            offending_trace = exc.trace
        k = int(res.first_violation[i])
        offending = {
            "trial": i,
            "target": list(map(float, targets[i])),
            "init": list(map(float, inits[i])),
            "iteration": k,
            "increase": float(res.max_increase[i]),
        }
    finite_inc = res.max_increase[np.isfinite(res.max_increase)]
    return Theorem1Report(
        trials=len(targets),
        alpha=cfg.alpha,
        max_iters=cfg.max_iters,
        slack=slack,
        violations=int(bad.size),
        violating_trials=[int(b) for b in bad],
        worst_increase=float(finite_inc.max()) if finite_inc.size else 0.0,
        degenerate=int(res.degenerate.sum()),
        converged=int(res.converged.sum()),
        offending=offending,
        offending_trace=offending_trace,
    )


def _batch_chunk(targets, inits, cfg, bounds):
    lo, hi = bounds
    res = run_batch(targets[lo:hi], inits[lo:hi], cfg)
    return res.eiou, res.iterations, res.converged, res.degenerate


def sweep(
    n: int,
    seed: int,
    variants: dict[str, OptimConfig],
    *,
    lo: float = 0.0,
    hi: float = 4.0,
    workers: int = 1,
    chunk: int = 256,
) -> dict:
    """Run every config on the same ``n`` random pairs and summarize.

    Rows are independent, so the summary does not depend on ``workers``.
    """
    if n < 1:
        raise EmptySample("sweep needs at least one pair")
    targets, inits = random_pairs(seed, n, lo, hi)
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    summary = {"n": n, "seed": seed, "range": [lo, hi], "variants": {}}
    for name, cfg in variants.items():
        fn = functools.partial(_batch_chunk, targets, inits, cfg)
        parts = map_indices(functools.partial(_chunk_at, fn, bounds), len(bounds), workers)
        e = np.concatenate([p[0] for p in parts])
        iters = np.concatenate([p[1] for p in parts])
        conv = np.concatenate([p[2] for p in parts])
        degen = np.concatenate([p[3] for p in parts])
        q = np.quantile(e, [0.0, 0.25, 0.5, 0.75, 1.0])
        summary["variants"][name] = {
            "mode": cfg.mode.value,
            "loss": str(cfg.loss),
            "alpha": cfg.alpha,
            "max_iters": cfg.max_iters,
            "convergence_rate": float(conv.mean()),
            "median_iterations": float(np.median(iters)),
            "degenerate": int(degen.sum()),
            "final_eiou_quantiles": {k: float(v) for k, v in zip(("min", "q25", "median", "q75", "max"), q)},
        }
    return summary


def _chunk_at(fn, bounds, j):
    return fn(bounds[j])
