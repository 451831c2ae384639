"""Command line interface.

    pentimento reconstruct --config cfg.json
    pentimento prep --in xray.png --mask mask.png --out content.png
    pentimento gradcheck
    pentimento gram --image img.png --layer conv3_1 --weights w.nstw
    pentimento serve --store ./store
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import prep
from .errors import PentimentoError
from .gradcheck import run_suite
from .losses import gram
from .network import FeatureExtractor
from .reconstruct import ReconstructionConfig, network_for_store, run
from .service import serve
from .weights import load_weights


def _cmd_reconstruct(args) -> int:
    config = ReconstructionConfig.from_json(args.config)
    report = run(config)
    print(f"wrote {report.final_image} ({len(report.history)} iterations)")
    if report.history:
        first, last = report.history[0], report.history[-1]
        print(f"total loss: {first.total:.6g} -> {last.total:.6g} "
              f"(best {report.best_total:.6g})")
    print(f"report: {config.output_dir}/report.json, loss.csv, loss.png")
    return 0


def _cmd_prep(args) -> int:
    img = prep.load_image(args.input)
    gray = prep.to_gray(img)
    if args.normalize:
        gray = prep.normalize_contrast(gray)
    if args.mask:
        mask = prep.load_mask(args.mask, shape=gray.shape)
        result = prep.inpaint_diffusion(gray, mask)
        gray = result.image
        if not result.converged:
            print(f"warning: inpainting stopped at {result.iterations} iterations "
                  "before reaching tolerance", file=sys.stderr)
    if args.size:
        h, w = prep.fit_long_side(*gray.shape, args.size)
        gray = prep.resize_bilinear(gray, h, w)
    prep.save_image(gray, args.out)
    print(f"wrote {args.out} ({gray.shape[0]}x{gray.shape[1]})")
    return 0


def _cmd_gradcheck(args) -> int:
    results = run_suite(seed=args.seed)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def _cmd_gram(args) -> int:
    store = load_weights(args.weights)
    net = FeatureExtractor(network_for_store(store), store)
    image = prep.to_net_input(prep.load_image(args.image))
    feats = net.features(image, [args.layer])
    g = gram(feats[args.layer], layer=args.layer)
    c = g.matrix.shape[0]
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for row in g.matrix:
                writer.writerow([repr(float(v)) for v in row])
        print(f"wrote {c}x{c} Gram matrix to {args.out}")
    else:
        print(f"{args.layer}: {c}x{c} Gram matrix, "
              f"trace {float(np.trace(g.matrix)):.6g}, "
              f"fro norm {float(np.linalg.norm(g.matrix)):.6g}")
    return 0


def _cmd_serve(args) -> int:
    serve(
        store_root=args.store,
        host=args.host,
        port=args.port,
        workers=args.workers,
        ui_dir=args.ui,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pentimento",
        description="Reconstruct hidden artwork from x-radiographs via "
        "gradient-based style transfer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="run a reconstruction from a JSON config")
    p.add_argument("--config", required=True, help="path to the JSON config file")
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("prep", help="normalize/mask/inpaint a radiograph")
    p.add_argument("--in", dest="input", required=True, help="input PNG/JPEG")
    p.add_argument("--mask", help="8-bit mask PNG (>=128 marks removal)")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--normalize", action="store_true",
                   help="percentile contrast stretch before masking")
    p.add_argument("--size", type=int, help="resize long side to this many pixels")
    p.set_defaults(fn=_cmd_prep)

    p = sub.add_parser("gradcheck", help="run the finite-difference suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("gram", help="Gram matrix of one layer for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--weights", required=True, help=".nstw weight file")
    p.add_argument("--out", help="write the matrix as CSV instead of a summary")
    p.set_defaults(fn=_cmd_gram)

    p = sub.add_parser("serve", help="start the studio job service")
    p.add_argument("--store", default=None, help="store root (env PENTIMENTO_STORE)")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=None, help="env PENTIMENTO_PORT")
    p.add_argument("--workers", type=int, default=None, help="env PENTIMENTO_WORKERS")
    p.add_argument("--ui", default=None, help="directory of static UI assets")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PentimentoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
