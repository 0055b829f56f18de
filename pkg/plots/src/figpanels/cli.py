"""Command line: render one figure from harness CSVs."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, SchemaError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="figpanels")
    sub = parser.add_subparsers(required=True)
    p = sub.add_parser("render", help="render a figure from result CSVs")
    p.add_argument("--figure", required=True, help="figure id (E2..E8)")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="input CSV paths")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--overlay", default=None, help="optional bound-curve CSV")
    p.add_argument("--log-x", action="store_true")
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_render)
    args = parser.parse_args(argv)
    return args.func(args)


def cmd_render(args) -> int:
    spec = FigureSpec(
        figure=args.figure,
        inputs=args.inputs,
        out=args.out,
        overlay=args.overlay,
        log_x=args.log_x,
        title=args.title,
    )
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
