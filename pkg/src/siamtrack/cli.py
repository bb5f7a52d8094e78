"""Command-line entry points: train, track, eval, ablate, labels, synth."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np
import torch
import yaml

from . import evaluate, labels, synthetic
from .config import (RunConfig, apply_override, config_to_dict, load_config,
                     save_config)
from .data import load_sequence
from .geometry import Box
from .model import SiamTrackNet, canonical_grid, load_checkpoint
from .track import track_sequence
from .train import train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg = apply_override(cfg, key, value)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
        cfg = dataclasses.replace(
            cfg, train=dataclasses.replace(cfg.train, seed=args.seed))
    return cfg


def _echo_config(cfg: RunConfig):
    print(yaml.safe_dump(config_to_dict(cfg), sort_keys=True), end="")


def _load_dataset(cfg: RunConfig, args):
    if getattr(args, "synthetic", False):
        rng = np.random.default_rng(cfg.seed + 1)
        return synthetic.make_synthetic_dataset(
            cfg.synth.num_sequences, cfg.synth.length, cfg.synth.motion, rng)
    root = getattr(args, "data", None) or cfg.paths.resolved_data_root()
    if not root:
        raise ValueError(
            "no dataset: pass --data/--synthetic or set paths.data_root")
    seq_dirs = sorted(p for p in Path(root).iterdir() if p.is_dir())
    if not seq_dirs:
        raise ValueError(f"no sequence directories under {root}")
    return [load_sequence(p) for p in seq_dirs]


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    _echo_config(cfg)
    train_cfg = cfg.train
    if args.steps is not None:
        train_cfg = dataclasses.replace(
            train_cfg, epochs=1, steps_per_epoch=args.steps)
    train_cfg = dataclasses.replace(train_cfg, seed=cfg.seed)
    dataset = _load_dataset(cfg, args)
    report = train(dataset, train_cfg, model_cfg=cfg.backbone,
                   crop_spec=cfg.crop, loss_cfg=cfg.loss)
    final = report.reports[-1]
    print(f"final checkpoint: {report.checkpoint_path}")
    print(f"final loss: {final.total:.4f} "
          f"(cls {final.cls_loss:.4f}, reg {final.reg_loss:.4f})")
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = _resolve_config(args)
    model, _ = load_checkpoint(args.checkpoint)
    record = load_sequence(args.sequence)
    init_box = Box.parse_line(args.init) if args.init else record.boxes[0]
    start = time.time()
    boxes, scores = track_sequence(model, record, init_box,
                                   post_cfg=cfg.postprocess,
                                   crop_spec=cfg.crop)
    elapsed = time.time() - start
    out_dir = Path(args.output or cfg.paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    box_file = out_dir / f"{record.name}_boxes.txt"
    box_file.write_text("\n".join(b.format_line() for b in boxes) + "\n")
    summary = {
        "sequence": record.name,
        "frames": len(boxes),
        "fps": (len(boxes) - 1) / elapsed if elapsed > 0 else 0.0,
        "scores": [round(s, 6) for s in scores],
    }
    (out_dir / f"{record.name}_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"boxes": str(box_file), "fps": round(summary["fps"], 2)}))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    model, _ = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(cfg, args)
    results = evaluate.run_benchmark(model, dataset, post_cfg=cfg.postprocess,
                                     crop_spec=cfg.crop,
                                     output_dir=args.output)
    print(json.dumps(results, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in labels.VARIANTS:
            raise ValueError(f"unknown label variant {v!r}")
    train_set = _load_dataset(cfg, args)
    eval_rng = np.random.default_rng(cfg.seed + 2)
    eval_set = synthetic.make_synthetic_dataset(
        max(2, cfg.synth.num_sequences // 2), cfg.synth.length,
        cfg.synth.motion, eval_rng)

    def train_variant(variant):
        train_cfg = dataclasses.replace(
            cfg.train, label_variant=variant, seed=cfg.seed,
            checkpoint_dir=str(Path(cfg.train.checkpoint_dir) / variant))
        report = train(train_set, train_cfg, model_cfg=cfg.backbone,
                       crop_spec=cfg.crop, loss_cfg=cfg.loss)
        model, _ = load_checkpoint(report.checkpoint_path)
        return model

    table = evaluate.run_ablation(train_variant, eval_set, variants,
                                  post_cfg=cfg.postprocess, crop_spec=cfg.crop)
    print(json.dumps(table, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_labels(args) -> int:
    box = Box.parse_line(args.box)
    cfg = labels.AssignmentConfig(variant=args.variant)
    label_map = labels.assign(box, canonical_grid(), cfg)
    print(labels.format_label_map(label_map))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    paths = synthetic.write_synthetic_dataset(
        args.output, cfg.synth.num_sequences, cfg.synth.length,
        cfg.synth.motion, seed=cfg.seed + 1)
    print(f"wrote {len(paths)} sequences under {args.output}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="siamtrack",
        description="Anchor-free Siamese single-object tracker")
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted-path config override")
    parser.add_argument("--seed", type=int, help="root random seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", help="dataset root of sequence directories")
    p.add_argument("--synthetic", action="store_true",
                   help="train on generated synthetic sequences")
    p.add_argument("--steps", type=int, help="override to a single-epoch run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="track one sequence")
    p.add_argument("checkpoint")
    p.add_argument("sequence")
    p.add_argument("--init", help="initial box as 'x,y,w,h' "
                                  "(default: first groundtruth line)")
    p.add_argument("--output", help="output directory")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a sequence set")
    p.add_argument("checkpoint")
    p.add_argument("--data")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--output", help="write results.json and box files here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare label-assignment variants")
    p.add_argument("--data")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--variants", default="ellipse,circle,rectangle")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("labels",
                       help="print a label map as a character grid")
    p.add_argument("box", help="ground-truth box as 'x,y,w,h' in "
                               "search-patch coordinates")
    p.add_argument("--variant", default="ellipse", choices=labels.VARIANTS)
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("output")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, IOError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
