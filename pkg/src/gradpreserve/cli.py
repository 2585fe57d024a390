"""Command-line entry point: ``gradpreserve <command> ...``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .evaluation import (
    PIPELINES,
    format_report,
    parity_report,
    pipeline_features,
    protect_images,
)
from .exceptions import InsufficientData, InvalidImage, ShapeMismatch
from .gdm import GdmConfig, gdm, gdm_residual, mean_abs_angle_error
from .generator import OptimizerConfig, generate_protected
from .hog import HogConfig, Weighting, extract_hog, write_features_binary, write_features_csv
from .imageio import load_dataset, load_image, save_image, three_panel, visualize
from .synth import synth_dataset

logger = logging.getLogger("gradpreserve")


def _write_text_atomic(path, text):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _gdm_cfg(args):
    return GdmConfig(epsilon=args.eps)


def _opt_cfg(args, seed=None):
    return OptimizerConfig(
        seed=args.seed if seed is None else seed,
        learning_rate=args.lr,
        max_iters=args.iters,
        tolerance=args.tol,
        schedule=args.schedule,
    )


def cmd_protect(args):
    x = load_image(args.input)
    x_prime, report = generate_protected(x, _opt_cfg(args), _gdm_cfg(args))
    save_image(x_prime, args.output)
    if args.report:
        _write_text_atomic(args.report, report.to_json(indent=2) + "\n")
    logger.info("seed %d: %d iterations, mean |angle error| %.4f rad",
                report.seed, report.iterations, report.final_mean_abs_error)
    return 0


def cmd_gdm(args):
    visualize(gdm(load_image(args.input), _gdm_cfg(args)), args.output, kind="gdm")
    return 0


def cmd_figure(args):
    score = three_panel(load_image(args.original), load_image(args.protected), args.output,
                        _gdm_cfg(args))
    print(f"ssim {score:.6f}")
    return 0


def cmd_hog(args):
    writers = {".csv": write_features_csv, ".bin": write_features_binary}
    suffix = Path(args.output).suffix.lower()
    if suffix not in writers:
        raise ValueError(f"output must end in .csv or .bin, got {args.output}")
    weighting = Weighting.MAGNITUDE if args.weighted else Weighting.UNWEIGHTED
    features = extract_hog(load_image(args.input), HogConfig(args.cell, args.bins, weighting),
                           _gdm_cfg(args))
    writers[suffix](features, args.output)
    logger.info("wrote %d features", features.size)
    return 0


def cmd_synth(args):
    images, labels = synth_dataset(args.classes, args.per_class, args.size, args.noise, args.seed)
    out = Path(args.outdir)
    counts = {}
    for img, label in zip(images, labels):
        class_dir = out / f"class_{label:02d}"
        class_dir.mkdir(parents=True, exist_ok=True)
        n = counts.get(label, 0)
        counts[label] = n + 1
        save_image(img, class_dir / f"img_{n:03d}.pgm")
    logger.info("wrote %d images in %d classes to %s", len(images), len(counts), out)
    return 0


def cmd_eval(args):
    images, labels, manifest = load_dataset(args.root)
    pipelines = args.pipeline or list(PIPELINES)
    hog_cfg = HogConfig(args.cell, args.bins)
    gdm_cfg = _gdm_cfg(args)
    protected = None
    if "proposed" in pipelines:
        logger.info("protecting %d images", len(images))
        protected, _ = protect_images(images, args.seed, _opt_cfg(args), gdm_cfg, args.jobs)
    features = {
        name: pipeline_features(name, images, protected, hog_cfg, gdm_cfg) for name in pipelines
    }
    seeds = [args.seed + k for k in range(args.repeats)]
    report = parity_report(features, labels, seeds, args.lam, args.epochs)
    report["manifest"] = {
        "root": manifest.root,
        "format": manifest.format,
        "n_images": len(manifest.entries),
        "n_classes": len(manifest.identities),
        "skipped": [{"path": p, "reason": r} for p, r in manifest.skipped],
    }
    print(format_report(report))
    if args.report:
        _write_text_atomic(args.report, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_verify(args):
    cfg = _gdm_cfg(args)
    a = gdm(load_image(args.original), cfg)
    b = gdm(load_image(args.protected), cfg)
    print(f"residual {gdm_residual(a, b):.10g}")
    print(f"mean_abs_error {mean_abs_angle_error(a, b):.10g}")
    return 0


def _add_eps(p):
    p.add_argument("--eps", type=float, default=1e-8, help="division guard (default 1e-8)")


def _add_optimizer(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1.0, help="initial step of the line search")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--schedule", choices=["staged", "direct"], default="staged")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gradpreserve",
        description="Gradient-preserving image protection and HOG evaluation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protect", help="generate a gradient-preserving image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--report", help="write the convergence report as JSON")
    _add_optimizer(p)
    _add_eps(p)
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("gdm", help="render the gradient-direction map as PNG")
    p.add_argument("input")
    p.add_argument("output")
    _add_eps(p)
    p.set_defaults(func=cmd_gdm)

    p = sub.add_parser("figure", help="three-panel render: x | x' | GDM(x')")
    p.add_argument("original")
    p.add_argument("protected")
    p.add_argument("output")
    _add_eps(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("hog", help="extract a HOG feature vector")
    p.add_argument("input")
    p.add_argument("output", help="destination .csv or .bin")
    p.add_argument("--cell", type=int, default=8)
    p.add_argument("--bins", type=int, default=9)
    p.add_argument("--weighted", action="store_true", help="magnitude-weighted votes")
    _add_eps(p)
    p.set_defaults(func=cmd_hog)

    p = sub.add_parser("synth", help="write a synthetic grating dataset")
    p.add_argument("outdir")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="run the recognition protocol on a dataset tree")
    p.add_argument("root", help="directory laid out as root/<identity>/<image>.pgm")
    p.add_argument("--pipeline", action="append", choices=PIPELINES,
                   help="repeatable; default runs all three")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--repeats", type=int, default=1, help="splits with seeds seed..seed+n-1")
    p.add_argument("--cell", type=int, default=8)
    p.add_argument("--bins", type=int, default=9)
    p.add_argument("--lam", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1, help="parallel protection workers")
    _add_optimizer(p)
    _add_eps(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="compare the direction maps of two images")
    p.add_argument("original")
    p.add_argument("protected")
    _add_eps(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (OSError, InvalidImage, ShapeMismatch, InsufficientData, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
