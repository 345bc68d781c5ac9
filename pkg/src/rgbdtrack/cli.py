"""Command line: track, eval, synth, compare."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from . import evaluation as ev
from . import synth
from .core import TrackMode
from .sequence import atomic_write_text, load_sequence, read_boxes, write_boxes
from .tracker import TrackerConfig, track

log = logging.getLogger("rgbdtrack")


class CliError(Exception):
    pass


def _load_gt(path):
    """Ground truth from a sequence directory or directly from a box file."""
    p = Path(path)
    if p.is_dir():
        return read_boxes(p / "groundtruth.txt"), p.name
    return read_boxes(p), p.stem


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def _summary_header(r_t):
    return ["sequence", f"R@{r_t:g}", "typeI", "typeII", "typeIII", "speed", "speed_mean"]


def _summary_row(name, m: ev.SequenceMetrics):
    return [name, _fmt(m.success_rate), _fmt(m.type_i), _fmt(m.type_ii), _fmt(m.type_iii),
            _fmt(m.speed), _fmt(m.speed_mean)]


def cmd_track(args) -> int:
    cfg = TrackerConfig.load(args.config) if args.config else TrackerConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    frames, gt = load_sequence(args.seq)
    if not frames:
        raise CliError(f"{args.seq}: sequence has no frames")
    init_box = gt[0]
    if init_box is None:
        raise CliError(f"{args.seq}: target is absent in frame 0; cannot initialize")
    mode = TrackMode.parse(args.mode)
    log.info("tracking %d frames in mode %s", len(frames), mode.value)
    results = track(frames, init_box, mode, cfg)
    write_boxes(args.out, [r.box for r in results])
    return 0


def cmd_eval(args) -> int:
    gt, name = _load_gt(args.gt)
    res = read_boxes(args.results)
    m = ev.evaluate(res, gt, args.rt)
    results = Path(args.results)
    out_dir = Path(args.out_dir) if args.out_dir else results.parent
    stem = results.stem
    frames_rows = [[i, _fmt(f.r), _fmt(f.cpe), f.error_type.value] for i, f in enumerate(m.frames)]
    atomic_write_text(out_dir / f"{stem}_frames.csv", _csv(["frame", "r", "cpe", "error_type"], frames_rows))
    summary = _csv(_summary_header(args.rt), [_summary_row(name, m)])
    atomic_write_text(out_dir / f"{stem}_summary.csv", summary)
    if args.curve:
        atomic_write_text(args.curve, _csv(["r_t", "R"], [[f"{t:g}", _fmt(r)] for t, r in m.curve]))
    sys.stdout.write(summary)
    return 0


def cmd_synth(args) -> int:
    if (args.spec is None) == (args.preset is None):
        raise CliError("give exactly one of --spec or --preset")
    if args.spec:
        spec = synth.ScenarioSpec.load(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
    else:
        spec = synth.preset(args.preset, args.seed or 0)
    synth.generate(spec, args.out)
    log.info("wrote %d frames to %s", spec.frames, args.out)
    return 0


def cmd_compare(args) -> int:
    gt, _ = _load_gt(args.gt)
    header = ["results"] + _summary_header(args.rt)[1:]
    rows = []
    for path in args.results:
        m = ev.evaluate(read_boxes(path), gt, args.rt)
        rows.append([Path(path).name] + _summary_row("", m)[1:])
    table = _csv(header, rows)
    if args.out:
        atomic_write_text(args.out, table)
    sys.stdout.write(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgbdtrack", description="RGBD single-object tracking and evaluation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="run the tracker over a sequence directory")
    t.add_argument("--seq", required=True, help="sequence directory (rgb/, depth/, groundtruth.txt)")
    t.add_argument("--mode", required=True, type=str.lower, choices=[m.value for m in TrackMode])
    t.add_argument("--config", help="key=value tracker config file")
    t.add_argument("--seed", type=int, help="overrides the config seed")
    t.add_argument("--out", required=True, help="results file")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score a results file against ground truth")
    e.add_argument("--gt", required=True, help="sequence directory or ground-truth file")
    e.add_argument("--results", required=True)
    e.add_argument("--rt", type=float, default=0.5, help="overlap threshold")
    e.add_argument("--curve", help="write the success curve CSV here")
    e.add_argument("--out-dir", help="directory for the frame and summary CSVs (default: next to results)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic sequence")
    s.add_argument("--spec", help="scenario JSON")
    s.add_argument("--preset", choices=synth.PRESETS)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("compare", help="summary table for several results files")
    c.add_argument("--gt", required=True)
    c.add_argument("--results", required=True, nargs="+")
    c.add_argument("--rt", type=float, default=0.5)
    c.add_argument("--out", help="also write the table as CSV")
    c.set_defaults(func=cmd_compare)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as e:
        print(f"rgbdtrack {args.command}: error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())
