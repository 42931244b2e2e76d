"""Script entry point: python -m obstacle_figures ARTIFACT_DIR KIND OUT_PATH."""

import argparse
import json
import sys

from .render import KINDS, FigureError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="obstacle_figures")
    parser.add_argument("artifact_dir")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("out_path")
    parser.add_argument("--dpi", type=int, default=130)
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        meta = render(
            FigureSpec(args.artifact_dir, args.kind, args.out_path, {"dpi": args.dpi})
        )
    except FigureError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(json.dumps(meta, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
