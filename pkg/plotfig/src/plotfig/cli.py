"""Command-line entry point: one figure per invocation."""

import argparse
import sys

from .render import FAMILIES, FigureSpec, render


def build_parser():
    parser = argparse.ArgumentParser(prog="plotfig")
    parser.add_argument("--family", required=True, choices=sorted(FAMILIES))
    parser.add_argument("--csv", action="append", required=True, help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--memory", type=int, action="append", help="restrict to these M")
    parser.add_argument("--source", action="append", help="restrict to these sources")
    parser.add_argument("--xlim", type=float, nargs=2, default=None)
    parser.add_argument("--ylim", type=float, nargs=2, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        family=args.family,
        csv_paths=tuple(args.csv),
        out_path=args.out,
        xlim=tuple(args.xlim) if args.xlim else None,
        ylim=tuple(args.ylim) if args.ylim else None,
        memories=tuple(args.memory) if args.memory else None,
        sources=tuple(args.source) if args.source else None,
    )
    try:
        out = render(spec)
    except (ValueError, OSError) as exc:
        print(f"plotfig: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
