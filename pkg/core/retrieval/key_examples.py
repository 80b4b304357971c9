# core/retrieval/key_examples.py

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Optional

from core.analyzer import DEFAULT_LOGGER, AnalysisRun, run_on_facts
from core.corpus.index import IndexedCodebase
from core.datalog.engine import AlertInstance, alerts_of, evaluate_naive
from core.datalog.negation import negate_predicate
from core.datalog.program import RuleProgram
from core.errors import PredifixError
from core.lang.codebase import Codebase
from core.lang.facts import context_lines, extract_facts
from core.lang.source import Location, split_lines
from core.retrieval.conditions import (
    BridgingPredicate, RetrievalConfig, alert_files, check_cond1, check_cond2, get_matches, get_predicates,
)


@dataclass(frozen=True)
class KeyExample:
    predicate: str
    codebase: str
    snippet: Location
    context_text: str
    source: str
    source_kind: str
    priority: int
    source_order: int = 0
    library_predicate: bool = False
    context_start: int = 1
    # snippets the predicate matches across the whole clean corpus, Condition 3 or not
    match_count: int = 0
    score: float = 0.0
    rank: int = 0

    @property
    def identity(self) -> tuple:
        return self.predicate, self.codebase, self.snippet, self.context_text

    def to_dict(self) -> dict:
        data = asdict(self)
        data["snippet"] = str(self.snippet)
        return data


def _example(pred: str, entry: IndexedCodebase, snippet: Location, program: RuleProgram,
             config: RetrievalConfig) -> KeyExample:
    first, _, text = context_lines(entry.codebase, snippet, config.example_context)
    return KeyExample(
        predicate=pred,
        codebase=entry.id,
        snippet=snippet,
        context_text=text,
        source=entry.source.name,
        source_kind=entry.source.kind,
        priority=entry.source.priority,
        source_order=entry.source.order,
        library_predicate=program.decl(pred).library,
        context_start=first,
    )


def _sort_key(example: KeyExample) -> tuple:
    return (example.priority, example.source_order, example.codebase,
            example.snippet.file, example.snippet.line, example.predicate)


def find_bridging_predicates(program: RuleProgram, target_run: AnalysisRun, target_alert: AlertInstance,
                             logger: Optional[logging.Logger] = None) -> list[BridgingPredicate]:
    """Predicates passing Conditions 1 and 2, checked in that order."""
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    bridges = []
    for pred in get_predicates(program):
        if not check_cond1(program, pred):
            logger.debug(f"{pred}: no location parameter")
            continue
        cond2 = check_cond2(program, pred, target_run, target_alert)
        if cond2.outcome.skip is not None:
            logger.debug(f"{pred}: negation skipped ({cond2.outcome.skip.value})")
            continue
        if not cond2:
            logger.debug(f"{pred}: flipped rule still reports the target alert")
            continue
        bridges.append(BridgingPredicate(pred, program.decl(pred).loc_indices, cond2.outcome.program))
    logger.info(f"Bridging predicates: {', '.join(b.name for b in bridges) or 'none'}")
    return bridges


def _with_match_counts(examples: list[KeyExample], counts: Counter) -> list[KeyExample]:
    return [replace(ex, match_count=counts[ex.predicate]) for ex in examples]


def _examples_in(program: RuleProgram, bridges: list[BridgingPredicate], entry: IndexedCodebase,
                 config: RetrievalConfig, logger: logging.Logger) -> tuple[list[KeyExample], Counter]:
    """Key examples in one clean codebase, plus how many snippets each bridge matched there."""
    counts = Counter()
    try:
        original = run_on_facts(program, entry.edb, entry.id)
    except PredifixError as e:
        logger.warning(f"Skipping codebase {entry.id}: {e}")
        return [], counts
    found = []
    for bridge in bridges:
        matches = get_matches(program, original.full_facts, bridge.name)
        if not matches:
            continue
        counts[bridge.name] += len(matches)
        try:
            flipped = run_on_facts(bridge.negated_program, entry.edb, entry.id)
        except PredifixError as e:
            logger.warning(f"Skipping {bridge.name} on {entry.id}: {e}")
            continue
        if not flipped.alerts:
            continue
        files = alert_files(flipped) if config.same_file_cond3 else None
        for snippet in matches:
            if files is not None and snippet.file not in files:
                continue
            try:
                found.append(_example(bridge.name, entry, snippet, program, config))
            except PredifixError as e:
                logger.warning(f"Skipping snippet {entry.id}/{snippet}: {e}")
    return found, counts


def identify_key_examples(program: RuleProgram, target_run: AnalysisRun, target_alert: AlertInstance,
                          clean_cbs: Iterable[IndexedCodebase], config: RetrievalConfig,
                          logger: Optional[logging.Logger] = None) -> list[KeyExample]:
    """
    Key examples for `target_alert`: bridging predicates first (Conditions 1 and 2),
    then their matches in every clean codebase filtered by Condition 3.
    Condition 3 runs once per (predicate, codebase); codebases are checked in parallel.
    Each example carries its predicate's match count over all clean codebases.
    """
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    bridges = find_bridging_predicates(program, target_run, target_alert, logger)
    entries = list(clean_cbs)
    if not bridges or not entries:
        return []
    examples, counts = [], Counter()
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for found, found_counts in pool.map(lambda e: _examples_in(program, bridges, e, config, logger), entries):
            examples.extend(found)
            counts.update(found_counts)
    examples = _with_match_counts(examples, counts)
    examples.sort(key=_sort_key)
    logger.info(f"Found {len(examples)} key example(s) in {len(entries)} clean codebase(s)")
    return examples


def oracle_key_examples(program: RuleProgram, target: Codebase, target_alert: AlertInstance,
                        corpus: Iterable[IndexedCodebase], config: RetrievalConfig) -> list[KeyExample]:
    """
    Brute-force reference for identify_key_examples: every declared predicate
    against every line of every clean codebase, re-parsing and naively
    re-evaluating for each check. Slow on purpose; used by tests and --oracle.
    """
    examples, clean = [], []
    for entry in corpus:
        if alerts_of(program, evaluate_naive(program, _facts(program, entry.codebase))):
            continue
        clean.append(entry)
        for path, text in entry.codebase.texts.items():
            lines, _ = split_lines(text)
            for line in range(1, len(lines) + 1):
                snippet = Location(path, line)
                for pred in program.decls:
                    if _oracle_holds(program, pred, target, target_alert, entry.codebase, snippet, config):
                        examples.append(_example(pred, entry, snippet, program, config))
    counts = Counter({
        pred: sum(len(_oracle_matches(program, pred, entry.codebase)) for entry in clean)
        for pred in {ex.predicate for ex in examples}
    })
    return sorted(_with_match_counts(examples, counts), key=_sort_key)


def _facts(program: RuleProgram, codebase: Codebase):
    return extract_facts(codebase.parse()).project(program.inputs)


def _oracle_matches(program: RuleProgram, pred: str, codebase: Codebase) -> set:
    indices = program.decl(pred).loc_indices
    facts = evaluate_naive(program, _facts(program, codebase))
    return {row[i] for row in facts.get(pred) for i in indices}


def _oracle_holds(program, pred, target, target_alert, codebase, snippet, config) -> bool:
    decl = program.decl(pred)
    if not decl.loc_indices:
        return False
    facts = evaluate_naive(program, _facts(program, codebase))
    if not any(row[i] == str(snippet) for row in facts.get(pred) for i in decl.loc_indices):
        return False
    outcome = negate_predicate(program, pred)
    if not outcome.ok:
        return False
    flipped_target = alerts_of(outcome.program, evaluate_naive(outcome.program, _facts(program, target)))
    if target_alert in flipped_target:
        return False
    flipped = alerts_of(outcome.program, evaluate_naive(outcome.program, _facts(program, codebase)))
    if not flipped:
        return False
    if config.same_file_cond3:
        return any(
            Location.parse(alert.args[i]).file == snippet.file
            for alert in flipped for i in outcome.program.decl(alert.predicate).loc_indices
        )
    return True
