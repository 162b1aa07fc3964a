"""Command-line entry: gzsl-convert --res101 PATH --splits PATH --out DIR [--name NAME]."""

from __future__ import annotations

import argparse
import sys

from .convert import ConversionError, FormatError, convert, summarize_gzb_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gzsl-convert",
        description="Convert res101.mat + att_splits.mat to a GZB dataset directory")
    parser.add_argument("--res101", required=True, help="path to res101.mat")
    parser.add_argument("--splits", required=True, help="path to att_splits.mat")
    parser.add_argument("--out", required=True, help="output GZB directory")
    parser.add_argument("--name", default=None, help="dataset name (default: out directory name)")
    args = parser.parse_args(argv)

    try:
        out_dir = convert(args.res101, args.splits, args.out, name=args.name)
    except (FormatError, ConversionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    s = summarize_gzb_dir(out_dir)
    print(f"wrote {out_dir}: {s.n_seen_classes} seen / {s.n_unseen_classes} unseen classes, "
          f"{s.n_train} train / {s.n_test_seen} test-seen / {s.n_test_unseen} test-unseen samples")
    return 0


if __name__ == "__main__":
    sys.exit(main())
