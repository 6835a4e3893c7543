"""Command line front end: CSVs in, one static image out."""

from __future__ import annotations

import argparse
import sys

from .csvio import CsvFormatError
from .render import KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridfreq-plot",
        description="Render gridfreq trace/sweep CSVs to static figures")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path (PNG)")
    parser.add_argument("--labels", nargs="+", default=None,
                        help="legend labels, one per input (traces)")
    parser.add_argument("--threshold", type=float, default=59.3,
                        help="UFLS rule for trace plots; NaN hides it")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threshold = None if args.threshold != args.threshold else args.threshold
    spec = PlotSpec(inputs=args.inputs, kind=args.kind, out=args.out,
                    labels=args.labels, ufls_threshold_hz=threshold,
                    title=args.title)
    try:
        out = render(spec)
    except (CsvFormatError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
