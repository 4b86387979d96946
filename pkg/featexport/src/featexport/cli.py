"""Batch exporter: featexport LEFT RIGHT --checkpoint CK --out DIR."""
import argparse
import sys

import cv2

from .backbone import create_checkpoint, load_backbone
from .export import export_features


def build_parser():
    p = argparse.ArgumentParser(
        prog="featexport",
        description="Run the conv backbone on a stereo pair and write "
                    "FMAP feature tensors plus a JSON manifest.")
    p.add_argument("left", help="left image (PNG/JPG)")
    p.add_argument("right", help="right image")
    p.add_argument("--checkpoint", required=True, help=".npz weight file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--init-checkpoint", action="store_true",
                   help="create a seeded random checkpoint at --checkpoint "
                        "first if it does not exist")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --init-checkpoint")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.init_checkpoint:
            create_checkpoint(args.checkpoint, seed=args.seed)
        left = cv2.imread(args.left, cv2.IMREAD_COLOR)
        right = cv2.imread(args.right, cv2.IMREAD_COLOR)
        if left is None or right is None:
            print("error: could not read input images", file=sys.stderr)
            return 4
        backbone = load_backbone(args.checkpoint)
        manifest = export_features(left, right, backbone, args.out,
                                   checkpoint_path=args.checkpoint)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {manifest.left_path} and {manifest.right_path} "
          f"({manifest.channels} channels, alpha {manifest.alpha})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
