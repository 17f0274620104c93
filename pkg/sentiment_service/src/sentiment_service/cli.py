"""Command line: run the HTTP service or score a file in batch."""

import argparse
import logging
import sys

from .backends import MODELS
from .batch import SchemaError, score_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentiment-service",
        description="Financial-sentiment scoring: HTTP service and batch file scorer.",
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8900)

    score = sub.add_parser("score-file", help="score a news CSV into a fixture CSV")
    score.add_argument("--in", dest="in_path", required=True, help="news CSV (date,ticker,title)")
    score.add_argument("--out", dest="out_path", required=True, help="fixture CSV to write")
    score.add_argument("--model", default="finbert", choices=MODELS)
    score.add_argument("--batch-size", type=int, default=64)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "serve":
        import uvicorn

        from .app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    if args.command == "score-file":
        try:
            count = score_file(
                args.in_path, args.out_path, model=args.model, batch_size=args.batch_size
            )
        except SchemaError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return 1
        print(f"scored {count} rows -> {args.out_path}")
        return 0
    parser.print_usage(sys.stderr)
    return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
