"""Command-line surface: produce, serve.

Exit codes: 0 success, 2 config error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import logging
from typing import Sequence

from .errors import ConfigError, DataError, ModelError

log = logging.getLogger("cocoa_bridge")


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except ModelError as exc:
        log.error("model error: %s", exc)
        return 4
    except (DataError, OSError) as exc:
        log.error("data error: %s", exc)
        return 3
    return 0


def cmd_produce(args: argparse.Namespace) -> None:
    from .producer import ProducerConfig, produce_records

    produce_records(
        ProducerConfig(
            model=args.model,
            dataset=args.dataset,
            output=args.output,
            template=args.template,
            grader=args.grader,
            m=args.m,
            temperature=args.temperature,
            top_k=args.top_k,
            top_p=args.top_p,
            max_new_tokens=args.max_new_tokens,
            limit=args.limit,
            seed=args.seed,
        )
    )


def cmd_serve(args: argparse.Namespace) -> None:
    from .server import ServerConfig, serve

    serve(
        ServerConfig(cross_encoder=args.cross_encoder, nli=args.nli),
        host=args.host,
        port=args.port,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocoa-bridge",
        description="Produce generation records from a causal LM and serve "
        "neural similarity backends over HTTP.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    produce = sub.add_parser("produce", help="write generation records JSONL")
    produce.set_defaults(func=cmd_produce)
    produce.add_argument("--model", required=True, help="model name or path")
    produce.add_argument("--dataset", required=True, help="prompts JSONL path")
    produce.add_argument("--output", required=True, help="records JSONL path")
    produce.add_argument("--template", default="qa_minimal",
                         help="built-in template name or a file path")
    produce.add_argument("--grader", default="exact_match",
                         help="exact_match or token_f1")
    produce.add_argument("--m", type=int, default=5, help="samples per prompt")
    produce.add_argument("--temperature", type=float, default=1.0)
    produce.add_argument("--top-k", type=int, default=50)
    produce.add_argument("--top-p", type=float, default=1.0)
    produce.add_argument("--max-new-tokens", type=int, default=16)
    produce.add_argument("--limit", type=int, default=None,
                         help="use only the first N dataset items")
    produce.add_argument("--seed", type=int, default=0)

    serve = sub.add_parser("serve", help="run the similarity provider")
    serve.set_defaults(func=cmd_serve)
    serve.add_argument("--cross-encoder", default=None,
                       help="single-logit similarity model name or path")
    serve.add_argument("--nli", default=None, help="3-way NLI model name or path")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8431)

    return parser


if __name__ == "__main__":
    raise SystemExit(main())
