# core/retrieval/conditions.py

"""
The three checks that decide whether a predicate bridges an alert to corpus code:

  1. the predicate has a location parameter, so its facts point at code;
  2. flipping the predicate in the rule makes the target alert disappear;
  3. the flipped rule raises an alert of the same type in the clean codebase
     holding the matched snippet.
"""

from dataclasses import dataclass, field
from typing import Optional

from core.analyzer import AnalysisRun, run_on_facts
from core.datalog.engine import AlertInstance
from core.datalog.facts import FactSet
from core.datalog.negation import NegationOutcome, negate_predicate
from core.datalog.program import RuleProgram
from core.errors import ConfigError
from core.lang.source import Location


@dataclass(frozen=True)
class RetrievalConfig:
    example_context: int = 3
    alert_context: int = 10
    max_predicate_matches: int = 20
    max_examples_per_source: int = 4
    library_globs: tuple = ()
    same_file_cond3: bool = False
    literal_top_k: int = 3
    literal_min_len: int = 5
    workers: int = 4

    def __post_init__(self):
        object.__setattr__(self, "library_globs", tuple(self.library_globs))
        for name in ("example_context", "alert_context", "max_predicate_matches",
                     "max_examples_per_source", "literal_top_k", "literal_min_len", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"Invalid {name.upper()}; must be a positive integer.")


@dataclass(frozen=True)
class BridgingPredicate:
    name: str
    loc_param_indices: tuple
    negated_program: RuleProgram = field(repr=False)


@dataclass(frozen=True)
class Cond2Result:
    holds: bool
    outcome: NegationOutcome

    def __bool__(self) -> bool:
        return self.holds


def get_predicates(program: RuleProgram) -> list[str]:
    """Every declared predicate except the alert predicate, in declaration order."""
    return [name for name in program.decls if name != program.alert_pred]


def check_cond1(program: RuleProgram, pred: str) -> bool:
    return bool(program.decl(pred).loc_indices)


def check_cond2(program: RuleProgram, pred: str, target_run: AnalysisRun, target_alert: AlertInstance) -> Cond2Result:
    """Negate `pred` and re-run on the target facts; skips count as failure."""
    outcome = negate_predicate(program, pred)
    if not outcome.ok:
        return Cond2Result(False, outcome)
    rerun = run_on_facts(outcome.program, target_run.edb, target_run.codebase_id)
    return Cond2Result(target_alert not in rerun.alerts, outcome)


def get_matches(program: RuleProgram, full_facts: FactSet, pred: str) -> list[Location]:
    """Every loc-typed argument of every `pred` fact, deduplicated, by (file, line)."""
    indices = program.decl(pred).loc_indices
    found = {Location.parse(row[i]) for row in full_facts.get(pred) for i in indices}
    return sorted(found)


def alert_files(run: AnalysisRun) -> frozenset:
    files = set()
    for alert in run.alerts:
        for loc in alert.locations(run.program):
            files.add(Location.parse(loc).file)
    return frozenset(files)


def check_cond3(negated_program: RuleProgram, edb: FactSet, snippet: Location,
                config: RetrievalConfig, codebase_id: Optional[str] = None) -> bool:
    """True iff the flipped rule derives an alert on the codebase (in the snippet's file when same_file_cond3)."""
    run = run_on_facts(negated_program, edb, codebase_id or snippet.file)
    if not run.alerts:
        return False
    return not config.same_file_cond3 or snippet.file in alert_files(run)
