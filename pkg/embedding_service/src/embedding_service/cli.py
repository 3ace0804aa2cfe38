"""Command line: serve the embedding endpoint or fine-tune the encoder."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .finetune import finetune
from .service import DEFAULT_BATCH_LIMIT, ServiceConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embedding-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the /embed endpoint")
    p.add_argument("--model", default="char-ngram",
                   help="char-ngram, a fine-tuned model directory, or a "
                        "sentence-transformers checkpoint id")
    p.add_argument("--listen", default="127.0.0.1:8384", help="host:port")
    p.add_argument("--batch-limit", type=int, default=DEFAULT_BATCH_LIMIT)

    p = sub.add_parser("finetune", help="fit the local encoder on labeled pairs")
    p.add_argument("pairs", help="CSV of text_a,text_b,label (pos|neg)")
    p.add_argument("--scale", type=float, default=20.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=0.02)
    p.add_argument("--out", default="finetuned-model")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            serve(ServiceConfig.from_listen(args.model, args.listen,
                                            args.batch_limit))
            return 0
        saved, losses = finetune(
            Path(args.pairs), scale=args.scale, epochs=args.epochs,
            learning_rate=args.learning_rate, out_dir=Path(args.out),
            seed=args.seed,
        )
        for epoch, loss in enumerate(losses):
            print(f"epoch {epoch}: loss {loss:.6f}")
        print(f"model -> {saved}")
        return 0
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
