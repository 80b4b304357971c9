# core/commands/inputs.py

"""Loading and printing helpers shared by the command handlers."""

import json
from pathlib import Path

from colorama import Fore, Style

from core.analyzer import AnalysisError, AnalysisRun, AmbiguousAlert, find_alert
from core.datalog.program import NonStratified, RuleParseError, UnsafeRule, load_program
from core.errors import PredifixError
from core.lang.codebase import Codebase, UndecodableSource, read_source


class UsageError(PredifixError):
    """Bad command-line input: missing files, malformed ids, invalid rule files."""


def load_rules(path):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"rules file not found: {path}")
    try:
        return load_program(path)
    except (RuleParseError, UnsafeRule, NonStratified) as e:
        raise UsageError(f"invalid rule file {path}: {e}") from e


def load_target(path) -> Codebase:
    path = Path(path)
    if not path.is_dir():
        raise UsageError(f"target directory not found: {path}")
    try:
        return Codebase.load(path)
    except UndecodableSource as e:
        raise AnalysisError(f"{path.name}: {e}", path=e.path) from e


def load_exclusions(paths) -> list[str]:
    texts = []
    for raw in paths or ():
        path = Path(raw)
        if not path.is_file():
            raise UsageError(f"exclusion file not found: {path}")
        try:
            texts.append(read_source(path))
        except UnicodeDecodeError as e:
            raise UsageError(f"exclusion file is not valid UTF-8: {path}") from e
    return texts


def resolve_alert(run: AnalysisRun, alert_id: str):
    """UsageError for malformed and ambiguous ids; AlertNotFound passes through."""
    try:
        return find_alert(run, alert_id)
    except (ValueError, AmbiguousAlert) as e:
        raise UsageError(str(e)) from e


def print_json(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False))


def print_colored(color: str, text: str) -> None:
    print(color + text + Style.RESET_ALL)


def warn(text: str) -> None:
    print_colored(Fore.YELLOW, text)
