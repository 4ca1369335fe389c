"""Command-line entry: export benchmark sessions to EEGB v1 directories.

Example:
  moabb-export --dataset bnci2014004 --out datasets/ --subjects 1,2 --sessions 0,1
"""

from __future__ import annotations

import argparse
import sys

from .datasets import DESCRIPTORS, ExportError, ExportSpec, UnsupportedDataset, export


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="moabb-export",
        description=__doc__,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--dataset", required=True, choices=sorted(DESCRIPTORS),
        help="benchmark to export",
    )
    parser.add_argument("--out", required=True, help="output root directory")
    parser.add_argument(
        "--subjects", type=_int_list, default=None,
        help="comma-separated benchmark subject numbers (default: all)",
    )
    parser.add_argument(
        "--sessions", type=_int_list, default=None,
        help="comma-separated exported session indices (default: all kept)",
    )
    args = parser.parse_args(argv)
    spec = ExportSpec(
        dataset=args.dataset,
        output_root=args.out,
        subjects=args.subjects,
        sessions=args.sessions,
    )
    try:
        written = export(spec)
    except UnsupportedDataset as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ExportError as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(written)} session directories under {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
