# core/command_dispatcher.py

import sys

from colorama import Fore, Style

from core.analyzer import AlertNotFound, AnalysisError
from core.commands.analyze_handler import handle_analyze_logic
from core.commands.fix_handler import handle_fix_logic
from core.commands.index_handler import handle_index_logic
from core.commands.inputs import UsageError
from core.commands.retrieve_handler import handle_retrieve_logic
from core.corpus.index_storage import IndexStorageError
from core.corpus.manifest import ManifestError
from core.errors import ConfigError, PredifixError

EXIT_OK = 0
EXIT_NOT_FOUND = 1
EXIT_USAGE = 2
EXIT_FAILURE = 3

# checked in order; the first matching class decides the exit code
_ERROR_EXIT_CODES = (
    (UsageError, EXIT_USAGE),
    (ConfigError, EXIT_USAGE),
    (ManifestError, EXIT_USAGE),
    (AlertNotFound, EXIT_NOT_FOUND),
    (AnalysisError, EXIT_FAILURE),
    (IndexStorageError, EXIT_FAILURE),
    (PredifixError, EXIT_FAILURE),
)


class CommandDispatcher:
    """
    Routes a parsed command line to its handler and turns errors into exit codes:
    0 success, 1 not found / not fixed, 2 usage, 3 analysis or internal failure.
    """

    def __init__(self, config, logger):
        self.config = config
        self.logger = logger
        self.handlers = {
            "analyze": handle_analyze_logic,
            "index": handle_index_logic,
            "retrieve": handle_retrieve_logic,
            "fix": handle_fix_logic,
        }

    @staticmethod
    def exit_code_for(error: Exception) -> int:
        for error_type, code in _ERROR_EXIT_CODES:
            if isinstance(error, error_type):
                return code
        return EXIT_FAILURE

    def dispatch(self, args) -> int:
        handler = self.handlers.get(args.command)
        if handler is None:
            print(Fore.RED + f"Unknown command: {args.command}" + Style.RESET_ALL, file=sys.stderr)
            return EXIT_USAGE
        self.logger.debug(f"[Dispatcher] Running {args.command}")
        try:
            return handler(args, self.config, self.logger)
        except PredifixError as e:
            code = self.exit_code_for(e)
            self.logger.error(f"{args.command} failed ({type(e).__name__}): {e}")
            print(Fore.RED + f"Error: {e}" + Style.RESET_ALL, file=sys.stderr)
            return code
