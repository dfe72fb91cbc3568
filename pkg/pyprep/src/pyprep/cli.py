"""Command-line wrapper: convert recordings, render t-SNE and curve figures."""

from __future__ import annotations

import argparse
import sys

from .convert import convert_cwru
from .errors import PrepError
from .plots import plot_curves, plot_tsne


def _parse_layers(text: str):
    if text == "all":
        return "all"
    return [int(part) for part in text.split(",") if part.strip() != ""]


def cmd_convert(args) -> int:
    train_counts, test_counts = convert_cwru(args.source, args.out_train,
                                             args.out_test, args.seed)
    print(f"train {sum(train_counts)} samples {train_counts}")
    print(f"test {sum(test_counts)} samples {test_counts}")
    return 0


def cmd_tsne(args) -> int:
    results = plot_tsne(args.features, _parse_layers(args.layers), args.out,
                        seed=args.seed, perplexity=args.perplexity)
    for layer, path, _, _ in results:
        print(f"layer {layer} -> {path}")
    return 0


def cmd_curves(args) -> int:
    info = plot_curves(args.metrics, args.out)
    print(f"{info['trials']} trials x {info['epochs']} epochs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsvit-prep",
        description="Dataset conversion and figure rendering for the vibration classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="window MAT recordings into train/test dataset files")
    p.add_argument("--source", required=True, help="directory of <id>.mat recordings")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("tsne", help="render per-layer t-SNE scatters from a feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--layers", default="all", help='comma list of layer indices or "all"')
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.set_defaults(func=cmd_tsne)

    p = sub.add_parser("curves", help="render loss/accuracy curves from a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PrepError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
