"""ghlab-plots render --kind K --in CSV --out IMG"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ghlab-plots")
    sub = ap.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("render", help="render one figure from an emitted CSV")
    rp.add_argument("--kind", choices=KINDS, required=True)
    rp.add_argument("--in", dest="csv_path", type=Path, required=True)
    rp.add_argument("--out", dest="out_path", type=Path, required=True)
    rp.add_argument("--title", default=None)
    args = ap.parse_args(argv)

    try:
        info = render(FigureSpec(csv_path=args.csv_path, kind=args.kind,
                                 out_path=args.out_path, title=args.title))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {info.path}")
    for label, slope in info.annotations.get("slopes", {}).items():
        print(f"  {label}: slope {slope:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
