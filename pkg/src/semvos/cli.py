"""Command-line entry point.

Subcommands::

    semvos select    --sequence SEQ.json [--config CFG.json]
    semvos run       --sequence SEQ.json --out DIR [--config CFG.json] [--jobs N]
                     [--annotation MASK.pgm ...]
    semvos eval      --gt DIR --pred DIR [--tol PX] [--report FILE] [--tag SEQ=A,B]
    semvos gradcheck [--instances N] [--seed S]
    semvos overlay   --sequence SEQ.json --pred DIR --out DIR

Exit codes: 0 success, 1 usage error, 2 data error, 3 check failure.
"""
import argparse
import json
import logging
import os
import sys

from . import gradcheck, kernels
from .core import DimensionError
from .io import DataError, load_config, load_sequence, read_mask, write_labels, write_mask, write_rgb
from .pipeline import PipelineConfig, PipelineError, run_multiobject, run_sequence
from .report import (
    ANNOTATION_TINT,
    PREDICTION_TINT,
    evaluate,
    format_records,
    format_table,
    render_overlay,
)
from .semantics import SemanticModel, select_indices

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3



class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def frame_name(index):
    return f"{index:05d}.pgm"


def _config(args):
    return load_config(args.config) if args.config else PipelineConfig()


def cmd_select(args):
    seq = load_sequence(args.sequence)
    cfg = _config(args)
    if not seq.proposals or not seq.proposals[0]:
        raise DataError(f"{args.sequence}: no proposals for the annotated frame")
    props = seq.proposals[0]
    selected, _ = select_indices(seq.annotations[0], props, cfg.pool_size, cfg.min_gain)
    model = SemanticModel.from_categories(props[i].category for i in selected)
    print(f"model: {model}")
    print("selected: " + " ".join(str(i) for i in selected))
    for i in selected:
        print(f"  [{i}] {props[i].category} confidence={props[i].confidence:.4f}")
    return EXIT_OK


def cmd_run(args):
    seq = load_sequence(args.sequence)
    cfg = _config(args)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    annotations = seq.annotations
    if args.annotation:
        annotations = []
        for p in args.annotation:
            m = read_mask(p)
            if m.shape != seq.shape:
                raise DataError(f"{p}: annotation is {m.shape}, frames are {seq.shape}")
            annotations.append(m)
    os.makedirs(args.out, exist_ok=True)
    manifest = {
        "sequence": seq.name,
        "backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "objects": [],
    }
    if len(annotations) == 1:
        results = [run_sequence(seq.frames, annotations[0], seq.proposals, seq.contours, cfg, args.jobs)]
        dirs = [args.out]
    else:
        multi = run_multiobject(seq.frames, annotations, seq.proposals, seq.contours, cfg, args.jobs)
        results = multi.objects
        dirs = [os.path.join(args.out, f"object{k + 1}") for k in range(len(results))]
        for t, labels in enumerate(multi.labels, start=1):
            write_labels(os.path.join(args.out, "labels", frame_name(t)), labels)
    for k, (res, out_dir) in enumerate(zip(results, dirs)):
        for t, mask in enumerate(res.masks, start=1):
            write_mask(os.path.join(out_dir, frame_name(t)), mask)
        manifest["objects"].append({
            "object": k + 1,
            "output": os.path.relpath(out_dir, args.out),
            "model": res.model.as_dict(),
            "selected": res.selected,
            "provenance": {str(t): sel for t, sel in enumerate(res.provenance, start=1)},
            "timings_ms": {s: round(ms, 3) for s, ms in sorted(res.timings.items())},
        })
    with open(os.path.join(args.out, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {sum(len(r.masks) for r in results)} masks to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    evals = evaluate(args.gt, args.pred, args.tol, args.recall_threshold)
    tags = {}
    for item in args.tag or []:
        name, sep, attrs = item.partition("=")
        if not sep:
            raise UsageError(f"--tag expects SEQ=ATTR[,ATTR...], got {item!r}")
        tags[name] = [a for a in attrs.split(",") if a]
    for ev in evals:
        ev.attributes = tags.get(ev.name, [])
    sys.stdout.write(format_table(evals))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(format_records(evals))
    return EXIT_OK


def cmd_gradcheck(args):
    err_app = gradcheck.check_appearance(args.instances, args.seed)
    err_cond = gradcheck.check_conditional(args.instances, args.seed + 1)
    ok = err_app <= gradcheck.TOLERANCE and err_cond <= gradcheck.TOLERANCE
    print(f"appearance  max relative error {err_app:.3e}")
    print(f"conditional max relative error {err_cond:.3e}")
    print(f"tolerance {gradcheck.TOLERANCE:.0e}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_overlay(args):
    seq = load_sequence(args.sequence)
    os.makedirs(args.out, exist_ok=True)
    frame0 = seq.frames[0]
    for ann in seq.annotations:
        frame0 = render_overlay(frame0, ann, ANNOTATION_TINT)
    write_rgb(os.path.join(args.out, "00000.ppm"), frame0)
    for t in range(1, len(seq.frames)):
        mask = read_mask(os.path.join(args.pred, frame_name(t)))
        if mask.shape != seq.shape:
            raise DataError(f"{args.pred}: frame {t} mask is {mask.shape}, frames are {seq.shape}")
        out = render_overlay(seq.frames[t], mask, PREDICTION_TINT)
        write_rgb(os.path.join(args.out, f"{t:05d}.ppm"), out)
    print(f"wrote {len(seq.frames)} overlays to {args.out}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="semvos", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="semantic selection on the annotated frame")
    p.add_argument("--sequence", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("run", help="segment a sequence")
    p.add_argument("--sequence", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--annotation", action="append", help="frame-0 object mask; repeat for several objects")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="J/F statistics of predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--tol", type=float, help="boundary tolerance in pixels (default: 0.8%% of diagonal)")
    p.add_argument("--recall-threshold", type=float, default=0.5)
    p.add_argument("--report", help="write key = value records here")
    p.add_argument("--tag", action="append", help="SEQ=ATTR[,ATTR...] attribute tags")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the loss gradients")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("overlay", help="render annotation/prediction overlays")
    p.add_argument("--sequence", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"semvos: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, PipelineError) as exc:
        print(f"semvos: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
