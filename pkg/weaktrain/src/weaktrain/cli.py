"""Command-line front end: train and predict."""

from __future__ import annotations

import argparse
import sys

from .config import TrainConfig
from .predict import predict
from .train import train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weaktrain",
        description="Train binary RGB-to-mask segmentation on pipeline-generated labels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a manifest's rgb/gt pairs")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p_train.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p_train.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    p_train.add_argument("--weight-decay", type=float, default=TrainConfig.weight_decay)
    p_train.add_argument("--input-resolution", type=int, default=TrainConfig.input_resolution)
    p_train.add_argument("--no-rotation-augment", action="store_true")
    p_train.add_argument("--no-intensity-augment", action="store_true")
    p_train.add_argument("--pretrained-encoder", action="store_true")
    p_train.add_argument("--no-holdout", action="store_true",
                         help="train on every sample (overfit sanity runs)")
    p_train.add_argument("--seed", type=int, default=TrainConfig.seed)

    p_pred = sub.add_parser("predict", help="write prediction masks for a manifest")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--manifest", required=True)
    p_pred.add_argument("--out", required=True)
    p_pred.add_argument("--threshold", type=float, default=0.5)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = TrainConfig(
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                weight_decay=args.weight_decay,
                rotation_augment=not args.no_rotation_augment,
                intensity_augment=not args.no_intensity_augment,
                input_resolution=args.input_resolution,
                pretrained_encoder=args.pretrained_encoder,
                holdout_split=not args.no_holdout,
                seed=args.seed,
            )
            best = train(args.manifest, config, args.out)
            print(f"best checkpoint: {best}")
        else:
            written = predict(args.checkpoint, args.manifest, args.out, args.threshold)
            print(f"wrote {len(written)} mask(s) to {args.out}")
        return 0
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
