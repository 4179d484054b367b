"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 protocol error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import copstream, harness, live, metrics, refpath
from .errors import ProtocolError, SchemaError
from .feedback import FeedbackConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PROTOCOL = 3


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def cmd_generate_path(args):
    params = refpath.GaitParams(
        step_length=args.step_length,
        step_period=args.step_period,
        ml_amplitude=args.ml_amplitude,
        path_length=args.length,
        double_support_fraction=args.double_support,
    )
    path = refpath.generate_gait_path(params, args.rate)
    refpath.save_path(path, args.out)
    print(f"wrote {len(path)} points ({path.duration:g} s) to {args.out}")
    return EXIT_OK


def cmd_run(args):
    plan = harness.load_plan(args.plan)
    if args.seed is not None:
        plan = plan.with_seed(args.seed)
    artifact = harness.run_session(plan)
    artifact.write(args.out_dir)
    sys.stdout.write(artifact.summary.to_csv())
    return EXIT_OK


def cmd_replay(args):
    path = refpath.load_path(args.path)
    config = FeedbackConfig(th_cop=args.th, t_a=args.ta, tick_rate=path.rate)
    record = harness.replay(args.cop, path, config)
    Path(args.out).write_text(harness.format_record(record, config), encoding="utf-8")
    ind = metrics.indicators(record, config.th_cop)
    row = ind.report_row()
    print(
        f"{len(record.commands)} commands; "
        + ", ".join(f"{k}={row[k]:.1f}" for k in metrics.REPORT_HEADER[2:])
    )
    return EXIT_OK


def cmd_metrics(args):
    records, th = harness.load_records(args.records)
    if not records:
        raise SchemaError(f"no trial records found under {args.records}")
    th = args.th if args.th is not None else (th if th is not None else 0.1)
    summary = metrics.summarize(records, th)
    sys.stdout.write(summary.to_csv() if args.format == "csv" else summary.to_json())
    return EXIT_OK


def cmd_serve(args):
    path = refpath.load_path(args.path)
    config = FeedbackConfig(th_cop=args.th, t_a=args.ta, tick_rate=path.rate)

    def ready(addr):
        print(f"listening on {addr[0]}:{addr[1]}", flush=True)

    violations = live.serve_live(args.listen, path, config, once=args.once, ready=ready)
    if violations and args.once:
        raise ProtocolError("session closed after repeated malformed lines")
    return EXIT_OK


def cmd_fuse(args):
    layout = copstream.load_layout(args.layout)
    frames = copstream.parse_plate_file(args.plates, layout)
    samples = copstream.fuse_recording(frames, args.threshold)
    if args.rate is not None:
        samples = copstream.resample_uniform(samples, args.rate, args.max_gap)
    copstream.write_cop_csv(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="copguide", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-path", help="synthesise a slow-walk reference path")
    p.add_argument("--step-length", type=float, default=0.3)
    p.add_argument("--step-period", type=float, default=2.0)
    p.add_argument("--ml-amplitude", type=float, default=0.05)
    p.add_argument("--length", type=float, default=3.0)
    p.add_argument("--double-support", type=float, default=0.3)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_path)

    p = sub.add_parser("run", help="run a simulated session")
    p.add_argument("--plan", default="default", help="plan file, or 'default'")
    p.add_argument("--seed", type=_u64, default=None, help="overrides the plan's base seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="run the engine over a recorded fused-CoP file")
    p.add_argument("--cop", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--th", type=float, default=0.1)
    p.add_argument("--ta", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("metrics", help="summarise trial records")
    p.add_argument("--records", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--th", type=float, default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("serve", help="stream guidance commands over TCP")
    p.add_argument("--listen", required=True, help="host:port")
    p.add_argument("--path", required=True)
    p.add_argument("--th", type=float, default=0.1)
    p.add_argument("--ta", type=float, default=0.5)
    p.add_argument("--once", action="store_true", help="handle one connection, then exit")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fuse", help="fuse per-plate recordings into one CoP stream")
    p.add_argument("--plates", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--threshold", type=float, default=copstream.DEFAULT_CONTACT_THRESHOLD)
    p.add_argument("--rate", type=float, default=None, help="resample to this rate")
    p.add_argument("--max-gap", type=float, default=copstream.DEFAULT_MAX_GAP)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (SchemaError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
