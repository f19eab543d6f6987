"""CLI for training and prediction on exported datasets."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .model import ModelConfig
from .train import TrainConfig, predict, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rftrain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the fusion model")
    p_train.add_argument("--data", type=Path, required=True, help="exported .jsonl dataset")
    p_train.add_argument("--out", type=Path, required=True, help="output directory")
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--warmup-epochs", type=int, default=20)
    p_train.add_argument("--peak-lr", type=float, default=2e-4)
    p_train.add_argument("--batch-size", type=int, default=15)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--patch-size", type=int, default=16)
    p_train.add_argument("--hidden-dim", type=int, default=256)
    p_train.add_argument("--depth", type=int, default=4)
    p_train.add_argument("--heads", type=int, default=4)
    p_train.add_argument("--feature-dim", type=int, default=19, help="19 for r1, 9 for r2")
    p_train.add_argument("--min-radio-tokens", type=int, default=10)
    p_train.add_argument("--feature-mask", choices=("none", "aoa", "aod"), default="none")
    p_train.add_argument("--no-subsample", action="store_true")
    p_train.add_argument("--no-flips", action="store_true")
    p_train.add_argument("--no-variants", action="store_true")

    p_pred = sub.add_parser("predict", help="write predictions for a split")
    p_pred.add_argument("--checkpoint", type=Path, required=True)
    p_pred.add_argument("--data", type=Path, required=True)
    p_pred.add_argument("--out", type=Path, required=True)
    p_pred.add_argument("--split", default="test", choices=("train", "val", "test"))
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            model_cfg = ModelConfig(
                patch_size=args.patch_size,
                hidden_dim=args.hidden_dim,
                depth=args.depth,
                heads=args.heads,
                feature_dim=args.feature_dim,
                min_radio_tokens=args.min_radio_tokens,
            )
            train_cfg = TrainConfig(
                epochs=args.epochs,
                warmup_epochs=args.warmup_epochs,
                peak_lr=args.peak_lr,
                batch_size=args.batch_size,
                seed=args.seed,
                subsample=not args.no_subsample,
                flips=not args.no_flips,
                variants=not args.no_variants,
                feature_mask=args.feature_mask,
            )
            history, _ = train(args.data, model_cfg, train_cfg, args.out)
            best = min(history, key=lambda s: s.val_loss)
            print(
                f"trained {len(history)} epochs; best val loss {best.val_loss:.4f} "
                f"(epoch {best.epoch}, val IoU {best.val_macro_iou:.4f}); "
                f"artifacts in {args.out}"
            )
        else:
            written = predict(args.checkpoint, args.data, args.out, split=args.split)
            print(f"wrote {len(written)} predictions to {args.out}")
    except (ValueError, FileNotFoundError) as exc:
        print(f"rftrain: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
