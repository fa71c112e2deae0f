"""``eiou`` command line.

Exit status: 0 on success, 1 when an assertion fails or a search comes up
empty, 2 on bad input.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import json
import re
import sys
from pathlib import Path

from . import nms as nms_mod
from . import scenarios as sc
from .boxes import Box, classify_overlap, eiou, giou, siou
from .errors import DegenerateStep, EIoUError, NotFound, ParseError
from .gradients import default_checks, gradcheck_report
from .losses import LossSpec, smooth_eiou_loss
from .optimizer import Mode, OptimConfig, sweep
from .search import SearchBudget, giou_anomaly, misalign

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

EVAL_FIELDS = ("line", "siou", "eiou", "giou", "smooth_eiou_loss", "overlap_class")


def _num(v: float) -> str:
    return f"{v:.17g}"


def _dump_json(obj) -> str:
    # repr-based floats are the shortest strings that round-trip exactly
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _read_input(path) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


_SPLIT = re.compile(r"[\s,;]+")


def parse_pair_line(text: str, lineno: int) -> tuple[Box, Box]:
    """``x1,y1,x2,y2 x1,y1,x2,y2`` (any of comma, semicolon or whitespace
    between numbers): target first, prediction second."""
    fields = [f for f in _SPLIT.split(text.strip()) if f]
    if len(fields) != 8:
        raise ParseError(f"expected 8 numbers (two boxes), got {len(fields)}", line=lineno)
    try:
        vals = [float(f) for f in fields]
        return Box(*vals[:4]), Box(*vals[4:])
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from None


def cmd_eval(args) -> int:
    rows = []
    for lineno, raw in enumerate(_read_input(args.input).splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        t, p = parse_pair_line(raw, lineno)
        rows.append([str(lineno), _num(siou(t, p)), _num(eiou(t, p)), _num(giou(t, p)),
                     _num(smooth_eiou_loss(t, p)), classify_overlap(t, p).value])
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVAL_FIELDS)
        w.writerows(rows)
    return EXIT_OK


def _write_trace(trace, fh, fmt):
    if fmt == "jsonl":
        trace.write_jsonl(fh)
    else:
        trace.write_csv(fh)


def cmd_trace(args) -> int:
    scenarios = sc.load_scenarios(args.scenarios) if args.scenarios else sc.bundled_scenarios()
    if args.name:
        try:
            scenarios = [sc.find(scenarios, n) for n in args.name]
        except KeyError as exc:
            raise ParseError(exc.args[0]) from None
    single = len(scenarios) == 1
    out_dir = Path(args.out) if args.out and not single else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    # verdicts go to stderr when the trace itself is streamed to stdout
    report = sys.stderr if single and not args.out else sys.stdout

    failed = 0
    for s in scenarios:
        try:
            trace = s.run()
        except DegenerateStep as exc:
            print(f"FAIL {s.name} degenerate-step {exc}", file=report)
            failed += 1
            continue
        if single:
            with _open_out(args.out) as fh:
                _write_trace(trace, fh, args.format)
        elif out_dir:
            with open(out_dir / f"{s.name}.{args.format}", "w", newline="") as fh:
                _write_trace(trace, fh, args.format)
        for v in sc.check(trace, s.expect):
            print(f"{'PASS' if v.passed else 'FAIL'} {s.name} {v.check} {v.detail}", file=report)
            failed += not v.passed
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    loss = LossSpec.parse(args.loss)
    variants = {
        m: OptimConfig(alpha=args.alpha, max_iters=args.max_iters, loss_tol=args.loss_tol, mode=Mode(m), loss=loss)
        for m in args.modes.split(",")
    }
    summary = sweep(args.n, args.seed, variants, lo=args.range[0], hi=args.range[1], workers=args.workers)
    with _open_out(args.out) as fh:
        fh.write(_dump_json(summary))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = gradcheck_report(
        args.samples, args.seed, args.tol, h=args.step, checks=default_checks(LossSpec.parse(args.loss)),
        workers=args.workers,
    )
    with _open_out(args.out) as fh:
        fh.write(report.to_json() + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def _budget(args) -> SearchBudget:
    return SearchBudget(max_samples=args.max_samples, seed=args.seed, coordinate_range=tuple(args.range))


def cmd_misalign(args) -> int:
    w = misalign(_budget(args))
    with _open_out(args.out) as fh:
        fh.write(_dump_json(w.to_dict()))
    return EXIT_OK


def cmd_giou_anomaly(args) -> int:
    a = giou_anomaly(_budget(args))
    with _open_out(args.out) as fh:
        fh.write(_dump_json(a.to_dict()))
    return EXIT_OK


def cmd_nms_sim(args) -> int:
    specs = nms_mod.load_clusters(args.clusters) if args.clusters else nms_mod.bundled_clusters()
    if args.iou_noise is not None:
        specs = [dataclasses.replace(s, iou_noise=args.iou_noise) for s in specs]
    if args.detections:
        with open(args.detections, newline="") as fh:
            dets = nms_mod.read_detections(fh)
    else:
        dets = nms_mod.synth_clusters(specs)
    if args.dump_detections:
        with open(args.dump_detections, "w", newline="") as fh:
            nms_mod.write_detections(dets, fh)
    gts = [s.gt_box for s in specs]
    out = {"clusters": len(specs), "candidates": len(dets), "iou_thresh": args.iou_thresh,
           "match_thresh": args.match_thresh}
    for source in nms_mod.ScoreSource:
        kept = nms_mod.nms(dets, args.iou_thresh, source)
        out[source.value] = nms_mod.evaluate_selection(kept, gts, args.match_thresh).to_dict()
    with _open_out(args.out) as fh:
        fh.write(_dump_json(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eiou", description="Extended IoU metrics, losses and optimization experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="metrics for (target, pred) pairs, one pair per line")
    p.add_argument("input", nargs="?", help="pairs file (default: stdin)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="run scenarios, write traces and check expectations")
    p.add_argument("scenarios", nargs="?", help="scenario YAML (default: bundled scenarios)")
    p.add_argument("--name", action="append", help="scenario to run; repeatable (default: all)")
    p.add_argument("--out", help="trace file for one scenario, directory for several")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("sweep", help="compare update modes on random pairs")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", default="sot,plain")
    p.add_argument("--alpha", type=float, default=0.005)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--loss-tol", type=float, default=1e-6)
    p.add_argument("--loss", default="neg-eiou:p=2")
    p.add_argument("--range", type=float, nargs=2, default=(0.0, 4.0), metavar=("LO", "HI"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--loss", default="neg-eiou:p=2")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    for name, func, help_ in (
        ("misalign", cmd_misalign, "find a pair where Smooth-l1 and IoU disagree"),
        ("giou-anomaly", cmd_giou_anomaly, "find an overlapping pair with negative GIoU"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--max-samples", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--range", type=float, nargs=2, default=(0.0, 4.0), metavar=("LO", "HI"))
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("nms-sim", help="classification- vs IoU-guided NMS on synthetic clusters")
    p.add_argument("clusters", nargs="?", help="cluster YAML (default: bundled 50-cluster suite)")
    p.add_argument("--iou-noise", type=float, help="override every cluster's iou_noise")
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--match-thresh", type=float, default=0.5)
    p.add_argument("--detections", help="read candidates from CSV instead of synthesizing")
    p.add_argument("--dump-detections", help="write the candidates to CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_nms_sim)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotFound as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (EIoUError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
