"""Command-line entry point.

Subcommands: gen-synth, train, eval, count, export-features.  Run configs are
flat ``key=value`` text files whose keys are exactly the TsvitConfig and
TrainConfig field names; unknown keys are rejected with their line number so
typos in sweep scripts fail loudly.
"""

from __future__ import annotations

import argparse
import sys
import typing
from dataclasses import fields
from pathlib import Path

from . import data as data_mod
from . import train as train_mod
from .errors import ConfigError, TsvitError
from .model import (
    TsvitConfig,
    count_flops,
    count_params,
    count_params_paper_compatible,
    load_checkpoint,
    save_checkpoint,
)
from .train import TrainConfig


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _field_converters() -> dict:
    out = {}
    for cls in (TsvitConfig, TrainConfig):
        hints = typing.get_type_hints(cls)
        for f in fields(cls):
            kind = hints[f.name]
            out[f.name] = (cls, _parse_bool if kind is bool else kind)
    return out


_CONFIG_FIELDS = _field_converters()


def parse_config_file(path) -> tuple[TsvitConfig, TrainConfig]:
    """Read key=value lines; '#' starts a comment, blank lines are skipped.

    Keys missing from the file keep their defaults.  Unknown keys, duplicate
    keys and unparsable values raise ConfigError naming the line.
    """
    model_kwargs: dict = {}
    train_kwargs: dict = {}
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            seen.add(key)
            cls, convert = _CONFIG_FIELDS[key]
            try:
                parsed = convert(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
            (model_kwargs if cls is TsvitConfig else train_kwargs)[key] = parsed
    return TsvitConfig(**model_kwargs), TrainConfig(**train_kwargs)


def _require_file(path: str, role: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise TsvitError(f"{role} not found: {path}")
    return p


def cmd_gen_synth(args) -> int:
    dataset = data_mod.gen_synthetic(args.per_class, args.length, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data_mod.write_dataset(dataset, out)
    print(f"wrote {len(dataset)} samples ({dataset.num_classes} classes) to {out}")
    return 0


def cmd_train(args) -> int:
    data_path = _require_file(args.data, "dataset")
    config_path = _require_file(args.config, "config")
    model_cfg, train_cfg = parse_config_file(config_path)
    if args.trials is not None:
        train_cfg.trials = args.trials
        train_cfg.validate()
    dataset = data_mod.read_dataset(data_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sweep, reports = train_mod.run_trials(dataset, model_cfg, train_cfg)
    for report in reports:
        save_checkpoint(report.best_model, out_dir / f"trial{report.trial:02d}_best.tsvm")
    train_mod.write_metrics_csv(out_dir / "metrics.csv", reports)
    summary = (f"MaxAcc {sweep.max_acc:.4f} MinAcc {sweep.min_acc:.4f} "
               f"AvgAcc {sweep.avg_acc:.4f}")
    (out_dir / "summary.txt").write_text(summary + "\n")
    print(summary)
    return 0


def cmd_eval(args) -> int:
    data_path = _require_file(args.data, "dataset")
    ckpt_path = _require_file(args.checkpoint, "checkpoint")
    dataset = data_mod.read_dataset(data_path)
    model = load_checkpoint(ckpt_path)
    out_dir = Path(args.out_dir)
    loss, accuracy, confusion = train_mod.evaluate(model, dataset)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_mod.write_confusion_csv(out_dir / "confusion.csv", confusion, dataset.class_names)
    print(f"accuracy {accuracy:.4f}")
    print(f"loss {loss:.6f}")
    return 0


def cmd_count(args) -> int:
    config_path = _require_file(args.config, "config")
    model_cfg, _ = parse_config_file(config_path)
    params = count_params(model_cfg)
    flops = count_flops(model_cfg)
    print(f"params_total {params}")
    print(f"params_total_m {params / 1e6:.2f}")
    print(f"flops_total {flops.total}")
    print(f"flops_total_m {flops.total / 1e6:.2f}")
    print(f"flops_matmul_total {flops.matmul_total}")
    for name, value in flops.as_dict().items():
        print(f"flops.{name} {value}")
    if args.paper_compatible:
        p_sub = count_params_paper_compatible(model_cfg)
        print(f"params_paper_compatible {p_sub}")
        print(f"params_paper_compatible_m {p_sub / 1e6:.2f}")
        print(f"flops_paper_compatible {flops.paper_compatible}")
        print(f"flops_paper_compatible_m {flops.paper_compatible / 1e6:.2f}")
    return 0


def cmd_export_features(args) -> int:
    data_path = _require_file(args.data, "dataset")
    ckpt_path = _require_file(args.checkpoint, "checkpoint")
    dataset = data_mod.read_dataset(data_path)
    model = load_checkpoint(ckpt_path)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    train_mod.export_features(model, dataset, out)
    print(f"wrote {len(dataset) * (model.config.blocks + 1)} feature records to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsvit",
        description="Train and inspect the vibration-signal transformer classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic 4-class dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=500)
    p.add_argument("--length", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="run training trials on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("count", help="print parameter and FLOP accounting")
    p.add_argument("--config", required=True)
    p.add_argument("--paper-compatible", action="store_true")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("export-features", help="dump per-layer feature vectors")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_features)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TsvitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
