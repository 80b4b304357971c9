# core/analyzer.py

"""
Static analyzer backend: binds MiniLang fact extraction to the Datalog engine,
runs one rule over one codebase, and compares alert sets between runs.
"""

import difflib
import logging
from dataclasses import dataclass
from typing import Mapping, Optional

from core.datalog.engine import AlertInstance, alerts_of, evaluate
from core.datalog.facts import FactSet, TypeMismatch
from core.datalog.program import RuleProgram
from core.errors import PredifixError
from core.lang.codebase import Codebase
from core.lang.facts import codebase_facts
from core.lang.source import Location, ParseError, split_lines

DEFAULT_LOGGER = "predifix"

# file -> {old line -> new line}; files absent from the map are unchanged
Relocation = Mapping[str, Mapping[int, int]]


class AnalysisError(PredifixError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.path = path


class TargetNotInBefore(PredifixError):
    """The alert passed to alert_gone is not part of the `before` run."""


class AlertNotFound(PredifixError):
    pass


class AmbiguousAlert(PredifixError):
    pass


@dataclass(frozen=True)
class AnalysisRun:
    program: RuleProgram
    codebase_id: str
    alerts: frozenset
    full_facts: FactSet
    edb: FactSet

    def sorted_alerts(self) -> list[AlertInstance]:
        return sorted(self.alerts)


def run_on_facts(program: RuleProgram, edb: FactSet, codebase_id: str) -> AnalysisRun:
    """Evaluate `program` over already extracted facts (projected to the program's inputs)."""
    edb = edb.project(program.inputs)
    try:
        full = evaluate(program, edb)
    except TypeMismatch as e:
        raise AnalysisError(f"{codebase_id}: {e}") from e
    return AnalysisRun(program, codebase_id, alerts_of(program, full), full, edb)


def run_analysis(program: RuleProgram, codebase: Codebase) -> AnalysisRun:
    """Parse, extract and evaluate. ParseError and engine errors surface as AnalysisError."""
    try:
        edb = codebase_facts(codebase)
    except ParseError as e:
        raise AnalysisError(f"{codebase.id}: {e}", path=e.path) from e
    return run_on_facts(program, edb, codebase.id)


# ── Alert identities ─────────────────────────────────────────────────────────

def format_alert_id(program: RuleProgram, alert: AlertInstance) -> str:
    return f"{alert.predicate}@{';'.join(alert.locations(program))}"


def parse_alert_id(text: str) -> tuple[str, tuple]:
    """Split "<pred>@<loc>[;<loc>...]" into (pred, locations). Raises ValueError."""
    pred, sep, rest = text.partition("@")
    if not sep or not pred:
        raise ValueError(f"alert id must look like <predicate>@<file>:<line>, got {text!r}")
    locs = tuple(str(Location.parse(part)) for part in rest.split(";")) if rest else ()
    return pred, locs


def find_alert(run: AnalysisRun, alert_id: str) -> AlertInstance:
    """Resolve an alert id against a run. Raises ValueError, AlertNotFound or AmbiguousAlert."""
    pred, locs = parse_alert_id(alert_id)
    matches = [
        a for a in run.sorted_alerts()
        if a.predicate == pred and tuple(a.locations(run.program)) == locs
    ]
    if not matches:
        raise AlertNotFound(f"no alert {alert_id} in {run.codebase_id}")
    if len(matches) > 1:
        raise AmbiguousAlert(f"alert id {alert_id} matches {len(matches)} alerts")
    return matches[0]


# ── Comparing runs ───────────────────────────────────────────────────────────

def line_map(old_text: str, new_text: str) -> dict[int, int]:
    """
    Map 1-based lines of `old_text` to their position in `new_text`. Lines inside
    equal blocks and same-size replacements are mapped; the rest are left out.
    """
    old_lines, _ = split_lines(old_text)
    new_lines, _ = split_lines(new_text)
    matcher = difflib.SequenceMatcher(None, old_lines, new_lines, autojunk=False)
    mapping = {}
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag == "equal" or (tag == "replace" and i2 - i1 == j2 - j1):
            for k in range(i2 - i1):
                mapping[i1 + k + 1] = j1 + k + 1
    return mapping


def relocation_between(original: Codebase, patched: Codebase) -> dict[str, dict[int, int]]:
    relocation = {}
    for path, text in original.texts.items():
        new_text = patched.texts.get(path)
        if new_text is None:
            relocation[path] = {}
        elif new_text != text:
            relocation[path] = line_map(text, new_text)
    return relocation


def relocate(program: RuleProgram, alert: AlertInstance, relocation: Optional[Relocation]) -> Optional[AlertInstance]:
    """The alert as it would read in the patched codebase, or None when a location vanished."""
    if not relocation:
        return alert
    args = list(alert.args)
    for i in program.decl(alert.predicate).loc_indices:
        loc = Location.parse(args[i])
        if loc.file not in relocation:
            continue
        new_line = relocation[loc.file].get(loc.line)
        if new_line is None:
            return None
        args[i] = str(Location(loc.file, new_line))
    return AlertInstance(alert.rule_id, alert.predicate, tuple(args))


def introduced_alerts(before: AnalysisRun, after: AnalysisRun, relocation: Optional[Relocation] = None) -> list[AlertInstance]:
    carried = {relocate(before.program, a, relocation) for a in before.alerts}
    return sorted(after.alerts - carried)


def alert_gone(before: AnalysisRun, after: AnalysisRun, target: AlertInstance,
               relocation: Optional[Relocation] = None, logger: Optional[logging.Logger] = None) -> bool:
    """
    True iff `target` is in `before` and absent from `after` (after following
    `relocation`, when the patched files moved lines around). A location the
    relocation cannot map falls back to the alert's literal identity. Alerts
    new in `after` are logged as warnings and never change the verdict.
    """
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    if target not in before.alerts:
        raise TargetNotInBefore(f"{target} is not an alert of {before.codebase_id}")
    for alert in introduced_alerts(before, after, relocation):
        logger.warning(f"Patch introduced alert {format_alert_id(after.program, alert)}")
    moved = relocate(before.program, target, relocation)
    if moved is None:
        return target not in after.alerts
    return moved not in after.alerts
