"""Command line for the trainer: fit a model, emit predictions.

  satkerr-train train   --dataset <dir> --out <run dir> [--micro] [...]
  satkerr-train predict --dataset <dir> --checkpoint <pt> --split test --out <csv>
"""

from __future__ import annotations

import argparse
import json
import sys

from .model import ModelConfig
from .predict import predict
from .train import TrainConfig, train


def cmd_train(args) -> int:
    model_cfg = ModelConfig.micro() if args.micro else ModelConfig()
    train_cfg = TrainConfig(
        max_epochs=args.epochs,
        lr=args.lr,
        effective_batch=args.effective_batch,
        device_batch=args.device_batch,
        patience=args.patience,
        seed=args.seed,
        device=args.device,
    )
    summary = train(args.dataset, model_cfg, train_cfg, out_dir=args.out)
    print(json.dumps({"command": "train", **summary}))
    return 0


def cmd_predict(args) -> int:
    count = predict(args.dataset, args.split, args.checkpoint, args.out,
                    device=args.device)
    print(json.dumps({"command": "predict", "rows": count,
                      "out": str(args.out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satkerr-train")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the regression model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default="runs/latest")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--effective-batch", type=int, default=4096)
    p.add_argument("--device-batch", type=int, default=64)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--micro", action="store_true",
                   help="use the tiny test-scale model instead of the default")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write the exchange CSV for one split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
