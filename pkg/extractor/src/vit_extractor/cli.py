"""Command-line entry point for the extractor.

`vit-extract extract` runs a frozen backbone over a directory of images or
over the images referenced by a manifest CSV and writes MPFV1 feature
files. `vit-extract make-test-checkpoint` fabricates a small random
checkpoint with the registry's published widths, for offline testing.
"""

import argparse
import sys

from .checkpoints import CheckpointError, create_test_checkpoint
from .extract import run_extraction
from .registry import REGISTRY

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vit-extract",
        description="export frozen vision-transformer features to MPFV1 files")
    sub = parser.add_subparsers(dest="command")
    names = sorted(REGISTRY)

    p = sub.add_parser("extract", help="forward images through a backbone")
    p.add_argument("--backbone", required=True, choices=names)
    p.add_argument("--images", required=True,
                   help="image directory or manifest CSV")
    p.add_argument("--out", required=True, help="output .mpfv path")
    p.add_argument("--checkpoints", default=None,
                   help="checkpoint directory (default: $VIT_EXTRACTOR_CHECKPOINTS)")

    p = sub.add_parser("make-test-checkpoint",
                       help="write a reduced-depth random checkpoint")
    p.add_argument("--backbone", required=True, choices=names)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--image-size", type=int, default=None,
                   help="override the fixed input side (smaller = faster tests)")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: provide a subcommand", file=sys.stderr)
        return 2
    try:
        if args.command == "extract":
            written = run_extraction(args.backbone, args.images, args.out,
                                     checkpoints=args.checkpoints)
            for path in written:
                print(f"wrote {path}")
            return 0
        path = create_test_checkpoint(args.backbone, args.out_dir,
                                      depth=args.depth,
                                      image_size=args.image_size,
                                      seed=args.seed)
        print(f"wrote {path}")
        return 0
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
