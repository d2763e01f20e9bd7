"""Command-line entry point: render --manifest PATH --figures SPEC --out DIR.

Exit codes: 0 success, 1 runtime failure (missing files), 2 bad inputs.
"""

from __future__ import annotations

import argparse
import sys

from . import RenderError, load_figure_specs, render_figures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", required=True, metavar="PATH", help="manifest.jsonl of experiment CSVs")
    parser.add_argument("--figures", required=True, metavar="SPEC", help="figure layout file (YAML or JSON)")
    parser.add_argument("--out", default=".", metavar="DIR", help="output directory (default .)")
    args = parser.parse_args(argv)
    try:
        specs = load_figure_specs(args.figures)
        written = render_figures(args.manifest, specs, args.out)
    except RenderError as exc:
        print(f"render: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"render: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
