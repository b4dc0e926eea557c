"""Command line: render one figure from run CSVs."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="render figures from uavmec run artifacts")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--traces", required=True, nargs="+",
                        help="trace.csv files (positions.csv for --kind trajectory)")
    parser.add_argument("--out", required=True, help="output image (png/svg)")
    args = parser.parse_args(argv)
    out = render(PlotSpec(traces=args.traces, out=args.out, kind=args.kind))
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
