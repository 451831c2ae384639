"""CLI: export_weights --out vgg16.nstw [--from-file ckpt.pth | --init seeded]"""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportManifest, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export_weights",
        description="Write pretrained VGG-16 conv weights as a .nstw file.",
    )
    parser.add_argument("--out", required=True, help="output .nstw path")
    source = parser.add_mutually_exclusive_group()
    source.add_argument(
        "--from-file", dest="from_file",
        help="local torch checkpoint instead of downloading",
    )
    source.add_argument(
        "--init", choices=["seeded"],
        help="deterministic random weights (testing without a download)",
    )
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for --init seeded")
    args = parser.parse_args(argv)

    if args.from_file:
        src = args.from_file
    elif args.init == "seeded":
        src = f"seeded:{args.seed}"
    else:
        src = "torchvision"
    try:
        path = export(ExportManifest(source=src, output=args.out))
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path} (source: {src})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
