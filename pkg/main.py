#main.py

import argparse
import json
import sys

from colorama import Fore, Style, init as colorama_init

from core.command_dispatcher import EXIT_USAGE, CommandDispatcher
from core.config import Config
from core.errors import ConfigError
from core.logger_config import setup_logger
from tools.llm_backends import BACKENDS

# flag dest -> Config attribute
CONFIG_FLAGS = {
    "example_context": "EXAMPLE_CONTEXT",
    "alert_context": "ALERT_CONTEXT",
    "max_predicate_matches": "MAX_PREDICATE_MATCHES",
    "max_examples_per_source": "MAX_EXAMPLES_PER_SOURCE",
    "library_globs": "LIBRARY_GLOBS",
    "same_file_cond3": "SAME_FILE_COND3",
    "literal_top_k": "LITERAL_TOP_K",
    "literal_min_len": "LITERAL_MIN_LEN",
    "workers": "WORKERS",
    "mock_config": "MOCK_CONFIG",
    "session_log": "SESSION_LOG",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; keys mirror flag names")
    common.add_argument("--verbose", action="store_true", help="debug logging and effective config dump")

    retrieval = argparse.ArgumentParser(add_help=False)
    retrieval.add_argument("--index", help="corpus index directory (from `index`)")
    retrieval.add_argument("--exclude", action="append", default=[], metavar="FILE",
                           help="drop corpus files identical to FILE (repeatable)")
    retrieval.add_argument("--example-context", type=int)
    retrieval.add_argument("--alert-context", type=int)
    retrieval.add_argument("--max-predicate-matches", type=int)
    retrieval.add_argument("--max-examples-per-source", type=int)
    retrieval.add_argument("--library-glob", dest="library_globs", action="append", metavar="GLOB")
    retrieval.add_argument("--same-file-cond3", action="store_true", default=None)
    retrieval.add_argument("--literal-top-k", type=int)
    retrieval.add_argument("--literal-min-len", type=int)
    retrieval.add_argument("--workers", type=int)

    parser = argparse.ArgumentParser(prog="predifix", description="Retrieval-augmented repair of static-analysis alerts.")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", parents=[common], help="run a rule over a target codebase")
    analyze.add_argument("--rules", required=True)
    analyze.add_argument("--target", required=True)
    analyze.add_argument("--format", choices=("text", "json"), default="text")

    index = sub.add_parser("index", parents=[common], help="build and persist the corpus index")
    index.add_argument("--manifest", required=True)
    index.add_argument("--out", required=True)
    index.add_argument("--workers", type=int)

    retrieve = sub.add_parser("retrieve", parents=[common, retrieval], help="print ranked key examples")
    retrieve.add_argument("--rules", required=True)
    retrieve.add_argument("--target", required=True)
    retrieve.add_argument("--alert", required=True)
    retrieve.add_argument("--oracle", action="store_true", help="use the brute-force path")
    retrieve.add_argument("--limit", type=int)

    fix = sub.add_parser("fix", parents=[common, retrieval], help="run a repair session")
    fix.add_argument("--rules", required=True)
    fix.add_argument("--target", required=True)
    fix.add_argument("--alert", required=True)
    fix.add_argument("--backend", choices=BACKENDS)
    fix.add_argument("--mock-config")
    fix.add_argument("--session-log")
    fix.add_argument("--dry-run", action="store_true")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    overrides = {attr: getattr(args, dest, None) for dest, attr in CONFIG_FLAGS.items()}
    if args.command == "retrieve" and getattr(args, "index", None) is None:
        print(Fore.RED + "Error: retrieve needs --index" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_USAGE
    try:
        config = Config(config_file=args.config, overrides=overrides)
        logger = setup_logger(config, verbose=args.verbose)
    except ConfigError as e:
        print(Fore.RED + f"Configuration error: {e}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_USAGE

    if args.verbose:
        print(Fore.CYAN + "Effective configuration:" + Style.RESET_ALL, file=sys.stderr)
        print(json.dumps(config.describe(), indent=2, sort_keys=True), file=sys.stderr)

    return CommandDispatcher(config, logger).dispatch(args)


if __name__ == "__main__":
    colorama_init()
    sys.exit(main())
