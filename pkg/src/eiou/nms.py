"""Greedy non-maximum suppression ranked by class score or predicted IoU.

Ranking by a predicted localization score (an estimate of each candidate's
IoU with its object) keeps the best-localized box of a cluster even when the
classification confidence is uninformative about localization. The synthetic
generator below emulates such a predictor as true IoU plus bounded noise.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
import yaml

from .boxes import Box, siou
from .errors import DegenerateBox, EmptyInput, ParseError


class ScoreSource(str, enum.Enum):
    CLASSIFICATION = "classification"
    PREDICTED_IOU = "predicted-iou"


@dataclass(frozen=True)
class Detection:
    box: Box
    cls_score: float
    iou_score: float
    gt_id: int | None = None

    def __post_init__(self):
        for name in ("cls_score", "iou_score"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def score(self, source: ScoreSource) -> float:
        return self.cls_score if source is ScoreSource.CLASSIFICATION else self.iou_score


def suppression_groups(dets: Sequence[Detection], iou_thresh: float, score_source) -> list[tuple[int, list[int]]]:
    """Greedy NMS returning ``(kept index, indices it suppressed)`` in
    selection order. Equal scores are broken by lower original index."""
    if not dets:
        raise EmptyInput("no detections")
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError("iou_thresh must lie in (0, 1)")
    source = ScoreSource(score_source)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score(source), i))
    groups = []
    while order:
        keep, rest = order[0], order[1:]
        kb = dets[keep].box
        suppressed = [i for i in rest if siou(kb, dets[i].box) >= iou_thresh]
        gone = set(suppressed)
        order = [i for i in rest if i not in gone]
        groups.append((keep, suppressed))
    return groups


def nms(dets: Sequence[Detection], iou_thresh: float = 0.5, score_source=ScoreSource.CLASSIFICATION) -> list[Detection]:
    """Kept detections in selection order; each keeps its original cls_score."""
    return [dets[k] for k, _ in suppression_groups(dets, iou_thresh, score_source)]


@dataclass(frozen=True)
class ClusterSpec:
    """Recipe for one synthetic cluster of candidates around a ground truth.

    ``jitter_scale`` is the half-width of the uniform corner noise as a
    fraction of sqrt(gt area); the score noises are uniform half-widths.
    """

    gt_box: Box
    n_candidates: int
    jitter_scale: float = 0.1
    cls_noise: float = 0.5
    iou_noise: float = 0.0
    seed: int = 0
    cls_base: float = 0.5

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("a cluster needs at least one candidate")
        if min(self.jitter_scale, self.cls_noise, self.iou_noise) < 0:
            raise ValueError("noise levels must be non-negative")


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def synth_cluster(spec: ClusterSpec, index: int = 0) -> list[Detection]:
    rng = np.random.default_rng([spec.seed, index])
    gt = spec.gt_box
    half = spec.jitter_scale * math.sqrt(gt.area)
    out = []
    while len(out) < spec.n_candidates:
        noise = rng.uniform(-half, half, size=4) if half > 0 else np.zeros(4)
        # score draws happen for every candidate so streams stay aligned
        u_cls, u_iou = rng.uniform(-1.0, 1.0, size=2)
        try:
            box = Box(*(float(c + d) for c, d in zip(gt, noise)))
        except DegenerateBox:
            continue
        true_iou = siou(gt, box)
        out.append(
            Detection(
                box=box,
                cls_score=_clamp01(spec.cls_base + spec.cls_noise * u_cls),
                iou_score=_clamp01(true_iou + spec.iou_noise * u_iou),
                gt_id=index,
            )
        )
    return out


def synth_clusters(specs: Sequence[ClusterSpec]) -> list[Detection]:
    """Candidates for every cluster, cluster ``i`` drawn from ``(seed, i)``."""
    dets = []
    for i, spec in enumerate(specs):
        dets.extend(synth_cluster(spec, i))
    return dets


@dataclass
class SelectionMetrics:
    mean_iou: float
    recall: float
    per_gt_best_iou: list[float]
    matched: int
    kept: int

    def to_dict(self) -> dict:
        return {
            "mean_iou": self.mean_iou,
            "recall": self.recall,
            "matched": self.matched,
            "kept": self.kept,
            "per_gt_best_iou": self.per_gt_best_iou,
        }


def evaluate_selection(kept: Sequence[Detection], gts: Sequence[Box], match_thresh: float = 0.5) -> SelectionMetrics:
    """Score a selection against ground truths.

    Each kept detection (in selection order) is assigned to the gt it
    overlaps most; the first detection assigned to a gt is that gt's pick.
    ``mean_iou`` averages the picks' IoU, ``recall`` is the fraction of gts
    whose best kept detection reaches ``match_thresh``.
    """
    if not gts:
        raise EmptyInput("no ground-truth boxes")
    picks: dict[int, float] = {}
    best = [0.0] * len(gts)
    for det in kept:
        ious = [siou(g, det.box) for g in gts]
        j = max(range(len(gts)), key=lambda k: (ious[k], -k))
        if ious[j] > 0 and j not in picks:
            picks[j] = ious[j]
        for k, v in enumerate(ious):
            best[k] = max(best[k], v)
    mean = sum(picks.values()) / len(picks) if picks else 0.0
    recall = sum(b >= match_thresh for b in best) / len(gts)
    return SelectionMetrics(mean_iou=mean, recall=recall, per_gt_best_iou=best, matched=len(picks), kept=len(kept))


DETECTION_FIELDS = ("x1", "y1", "x2", "y2", "cls_score", "iou_score", "gt_id")


def write_detections(dets: Iterable[Detection], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DETECTION_FIELDS)
    for d in dets:
        gt = "" if d.gt_id is None else str(d.gt_id)
        w.writerow([f"{v:.17g}" for v in (*d.box, d.cls_score, d.iou_score)] + [gt])


def read_detections(fh: IO[str]) -> list[Detection]:
    """Read ``x1,y1,x2,y2,cls_score,iou_score[,gt_id]`` rows (header optional)."""
    dets = []
    for lineno, row in enumerate(csv.reader(fh), start=1):
        if not row or row[0].strip().startswith("#"):
            continue
        if lineno == 1 and row[0].strip() == "x1":
            continue
        if len(row) not in (6, 7):
            raise ParseError(f"expected 6 or 7 fields, got {len(row)}", line=lineno)
        try:
            vals = [float(v) for v in row[:6]]
            gt = int(row[6]) if len(row) == 7 and row[6].strip() else None
            dets.append(Detection(Box(*vals[:4]), vals[4], vals[5], gt))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return dets


def cluster_suite(n_clusters: int = 50, seed: int = 7, *, n_candidates: int = 20, jitter_scale: float = 0.15,
                  cls_noise: float = 0.5, iou_noise: float = 0.0, spacing: float = 10.0) -> list[ClusterSpec]:
    """Well-separated clusters on a grid, gt sizes drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    cols = math.ceil(math.sqrt(n_clusters))
    specs = []
    for i in range(n_clusters):
        w, h = rng.uniform(1.0, 3.0, size=2)
        x0, y0 = (i % cols) * spacing, (i // cols) * spacing
        specs.append(
            ClusterSpec(
                gt_box=Box(x0, y0, x0 + float(w), y0 + float(h)),
                n_candidates=n_candidates,
                jitter_scale=jitter_scale,
                cls_noise=cls_noise,
                iou_noise=iou_noise,
                seed=seed,
            )
        )
    return specs


def compare_sources(specs: Sequence[ClusterSpec], iou_thresh: float = 0.5, match_thresh: float = 0.5) -> dict:
    """Run NMS under both score sources on the same candidates."""
    if not specs:
        raise EmptyInput("no clusters")
    dets = synth_clusters(specs)
    gts = [s.gt_box for s in specs]
    out = {"clusters": len(specs), "candidates": len(dets), "iou_thresh": iou_thresh, "match_thresh": match_thresh}
    for source in ScoreSource:
        kept = nms(dets, iou_thresh, source)
        out[source.value] = evaluate_selection(kept, gts, match_thresh).to_dict()
    return out


CLUSTER_FORMAT = "eiou-clusters/1"
_SUITE_KEYS = {"n_clusters", "seed", "n_candidates", "jitter_scale", "cls_noise", "iou_noise", "spacing"}
_CLUSTER_KEYS = {"gt_box", "n_candidates", "jitter_scale", "cls_noise", "iou_noise", "seed", "cls_base"}


def parse_clusters(text: str) -> list[ClusterSpec]:
    """Cluster file: ``format: eiou-clusters/1`` plus either ``suite`` (the
    keyword arguments of :func:`cluster_suite`) or an explicit ``clusters``
    list of ClusterSpec fields."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    if not isinstance(doc, dict) or doc.get("format") != CLUSTER_FORMAT:
        raise ParseError(f"missing or unsupported format tag (expected {CLUSTER_FORMAT!r})", line=1)
    if ("suite" in doc) == ("clusters" in doc):
        raise ParseError("give exactly one of 'suite' or 'clusters'")
    try:
        if "suite" in doc:
            suite = doc["suite"] or {}
            if set(suite) - _SUITE_KEYS:
                raise ParseError(f"unknown suite key(s) {sorted(set(suite) - _SUITE_KEYS)}")
            specs = cluster_suite(**suite)
        else:
            items = doc["clusters"] or []
            specs = []
            for i, item in enumerate(items):
                if not isinstance(item, dict) or set(item) - _CLUSTER_KEYS:
                    raise ParseError(f"cluster #{i + 1}: expected a mapping of {sorted(_CLUSTER_KEYS)}")
                kw = dict(item)
                kw["gt_box"] = Box(*(float(v) for v in kw["gt_box"]))
                specs.append(ClusterSpec(**kw))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad cluster definition: {exc}") from None
    if not specs:
        raise EmptyInput("cluster file defines no clusters")
    return specs


def load_clusters(path: str | Path) -> list[ClusterSpec]:
    return parse_clusters(Path(path).read_text())


def bundled_clusters() -> list[ClusterSpec]:
    return parse_clusters(resources.files("eiou").joinpath("data/clusters.yaml").read_text())
