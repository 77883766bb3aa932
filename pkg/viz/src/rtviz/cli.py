"""viz <kind> <input> [second-input] -o <output.png>"""

import argparse
import sys
from pathlib import Path

from .plots import KINDS, FigureSpec, render
from .readers import VizError


def _build_parser():
    p = argparse.ArgumentParser(
        prog="viz", description="Render rtinverse artifacts to PNG figures.")
    p.add_argument("kind", choices=KINDS, help="what the input file holds")
    p.add_argument("inputs", nargs="+",
                   help="artifact path(s); a second field makes a side-by-side")
    p.add_argument("-o", "--output", type=Path, required=True,
                   help="PNG path to write")
    p.add_argument("--vmin", type=float, default=None, help="color range floor")
    p.add_argument("--vmax", type=float, default=None, help="color range ceiling")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs, out=args.output,
                          vmin=args.vmin, vmax=args.vmax)
        out = render(spec)
    except VizError as e:
        print(f"viz: {e}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
