"""make-figures: render diagnostic figures from a run or sweep directory.

    make-figures --in out/golden --out out/golden/figs
    make-figures --in out/sweep --out figs --kinds sweep_trends

Looks for diagnostics.csv (run kinds) and sweep.csv (sweep trends) in the
input directory; --kinds restricts the selection.  Exit 0 on success, 1 on
any figure error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from .figures import RUN_KINDS, SWEEP_KINDS, FigureSpec, make_figure


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="make-figures", description=__doc__)
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="run or sweep output directory")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the image files")
    parser.add_argument("--kinds", default=None,
                        help="comma list; default: every kind the inputs support")
    args = parser.parse_args(argv)

    run_csv = os.path.join(args.in_dir, "diagnostics.csv")
    sweep_csv = os.path.join(args.in_dir, "sweep.csv")
    available = {}
    if os.path.exists(run_csv):
        for kind in RUN_KINDS:
            available[kind] = run_csv
    if os.path.exists(sweep_csv):
        for kind in SWEEP_KINDS:
            available[kind] = sweep_csv
    if not available:
        print(f"no diagnostics.csv or sweep.csv in {args.in_dir}",
              file=sys.stderr)
        return 2

    if args.kinds:
        kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
        unknown = [k for k in kinds if k not in RUN_KINDS + SWEEP_KINDS]
        if unknown:
            print(f"unknown kinds: {', '.join(unknown)}", file=sys.stderr)
            return 2
        missing = [k for k in kinds if k not in available]
        if missing:
            print(f"inputs for kinds not present: {', '.join(missing)}",
                  file=sys.stderr)
            return 2
    else:
        kinds = list(available)

    os.makedirs(args.out_dir, exist_ok=True)
    status = 0
    for kind in kinds:
        out_path = os.path.join(args.out_dir, f"{kind}.png")
        try:
            make_figure(FigureSpec(available[kind], kind, out_path))
            print(f"{kind}: wrote {out_path}")
        except (ValueError, OSError) as exc:
            print(f"{kind}: ERROR {exc}", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
