"""``render --spec spec.json``: render one figure from a JSON figure spec.

The spec names the kind, the input CSV/JSON artifacts, coordinate selection,
tail window, and the output image path.  Exit codes: 0 success, 1 bad spec or
schema mismatch, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .io import SchemaError
from .render import FigureSpec, render

__all__ = ["main"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description="Render a figure from artifacts")
    parser.add_argument("--spec", required=True, help="figure spec (JSON)")
    args = parser.parse_args(argv)
    try:
        with open(args.spec) as fh:
            raw = json.load(fh)
        spec = FigureSpec.from_dict(raw)
        out = render(spec)
    except (SchemaError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
