# core/repair/session.py

import json
import logging
import operator
from dataclasses import dataclass, field
from typing import Annotated, Optional, TypedDict

from langgraph.graph import END, START, StateGraph

from core.analyzer import (
    DEFAULT_LOGGER, AnalysisError, AnalysisRun, alert_gone, format_alert_id, introduced_alerts,
    relocation_between, run_analysis,
)
from core.corpus.index import CorpusIndex, select_corpus
from core.datalog.engine import AlertInstance
from core.datalog.program import RuleProgram
from core.errors import PredifixError
from core.lang.codebase import Codebase
from core.lang.source import Location
from core.repair.patch import apply_patch, parse_patch
from core.repair.prompt import PromptBundle, RuleMetadata, alert_context, build_prompt
from core.retrieval.conditions import RetrievalConfig
from core.retrieval.key_examples import KeyExample, identify_key_examples
from core.retrieval.ranking import prioritize
from tools.llm_backends import ChatBackend

FIXED = "fixed"
EXHAUSTED = "exhausted"
ERROR = "error"
_RUNNING = "running"


class SessionState(TypedDict):
    target: Codebase
    before: AnalysisRun
    alert: AlertInstance
    anchor: Optional[Location]
    context_text: str
    pending: list
    current: Optional[KeyExample]
    prompt: Optional[PromptBundle]
    raw_response: Optional[str]
    backend_error: Optional[str]
    attempts: Annotated[list, operator.add]
    status: str
    patched: Optional[Codebase]


@dataclass
class RepairSession:
    rule_id: str
    alert_id: str
    sources: list
    attempts: list = field(default_factory=list)
    status: str = EXHAUSTED
    patched: Optional[Codebase] = None
    error: Optional[str] = None

    def changed_files(self, original: Codebase) -> dict[str, str]:
        if self.patched is None:
            return {}
        return {p: t for p, t in self.patched.texts.items() if original.texts.get(p) != t}

    def to_dict(self) -> dict:
        data = {
            "rule_id": self.rule_id,
            "alert_id": self.alert_id,
            "sources": list(self.sources),
            "status": self.status,
            "attempt_count": len(self.attempts),
            "attempts": self.attempts,
        }
        if self.error:
            data["error"] = self.error
        if self.patched is not None:
            data["patched_files"] = dict(self.patched.texts)
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)

    def summary(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "alert_id": self.alert_id,
            "status": self.status,
            "attempts": len(self.attempts),
            "sources": list(self.sources),
        }


class RepairLoop:
    """
    LangGraph session: PromptBuilder -> BackendCall -> PatchValidator, looping back
    to PromptBuilder with the next example until the alert is gone or the queue is
    empty. Every attempt patches the original target, never a previous attempt.
    """

    def __init__(self, program: RuleProgram, backend: ChatBackend, config: RetrievalConfig,
                 metadata: RuleMetadata, language: str = "MiniLang", logger: Optional[logging.Logger] = None):
        self.program = program
        self.backend = backend
        self.config = config
        self.metadata = metadata
        self.language = language
        self.logger = logger or logging.getLogger(DEFAULT_LOGGER)

        builder = StateGraph(SessionState)
        builder.add_node("PromptBuilder", self._prompt_builder_node)
        builder.add_node("BackendCall", self._backend_call_node)
        builder.add_node("PatchValidator", self._patch_validator_node)
        builder.add_edge(START, "PromptBuilder")
        builder.add_edge("PromptBuilder", "BackendCall")
        builder.add_edge("BackendCall", "PatchValidator")
        builder.add_conditional_edges(
            "PatchValidator",
            lambda state: "next" if state["status"] == _RUNNING else "done",
            {"next": "PromptBuilder", "done": END},
        )
        self.graph = builder.compile()

    # --- Nodes ---

    def _prompt_builder_node(self, state: SessionState) -> dict:
        example, rest = state["pending"][0], state["pending"][1:]
        prompt = build_prompt(self.metadata, state["context_text"], example, self.language)
        return {"current": example, "pending": rest, "prompt": prompt, "raw_response": None, "backend_error": None}

    def _backend_call_node(self, state: SessionState) -> dict:
        try:
            return {"raw_response": self.backend.complete(state["prompt"])}
        except PredifixError as e:
            self.logger.warning(f"Backend call failed: {e}")
            return {"backend_error": str(e)}

    def _patch_validator_node(self, state: SessionState) -> dict:
        example = state["current"]
        record = {
            "index": len(state["attempts"]),
            "example": example.to_dict() if example else None,
            "prompt": {"system": state["prompt"].system_text, "user": state["prompt"].user_text},
            "raw_response": state["raw_response"],
            "parse": None,
            "apply": None,
            "validation": None,
            "introduced_alerts": [],
        }
        patched = self._validate(state, record)
        label = f"with example {example.codebase}/{example.snippet}" if example else "without example"
        self.logger.info(f"Attempt {record['index']} {label}: {record['validation']}")

        if patched is not None:
            return {"attempts": [record], "status": FIXED, "patched": patched}
        status = _RUNNING if state["pending"] else EXHAUSTED
        return {"attempts": [record], "status": status}

    def _validate(self, state: SessionState, record: dict) -> Optional[Codebase]:
        if state["backend_error"] is not None:
            record["validation"] = f"backend-error: {state['backend_error']}"
            return None
        try:
            patch = parse_patch(state["raw_response"])
            record["parse"] = patch.to_list()
        except PredifixError as e:
            record["parse"] = f"error: {e}"
            record["validation"] = "no-patch"
            return None
        try:
            patched = apply_patch(state["target"], patch, state["anchor"])
            record["apply"] = sorted(relocation_between(state["target"], patched))
        except PredifixError as e:
            record["apply"] = f"error: {e}"
            record["validation"] = "not-applied"
            return None
        try:
            after = run_analysis(self.program, patched)
        except AnalysisError as e:
            record["validation"] = f"analysis-error: {e}"
            return None

        relocation = relocation_between(state["target"], patched)
        record["introduced_alerts"] = [
            format_alert_id(self.program, a) for a in introduced_alerts(state["before"], after, relocation)
        ]
        if alert_gone(state["before"], after, state["alert"], relocation, self.logger):
            record["validation"] = "alert-gone"
            return patched
        record["validation"] = "alert-remains"
        return None

    # --- Entry point ---

    def run(self, target: Codebase, before: AnalysisRun, alert: AlertInstance,
            per_source: dict[str, list[KeyExample]]) -> RepairSession:
        session = RepairSession(self.program.rule_id, format_alert_id(self.program, alert), list(per_source))
        anchor, context_text = alert_context(self.program, target, alert, self.config.alert_context)
        cap = self.config.max_examples_per_source
        queue = [None] + [ex for examples in per_source.values() for ex in examples[:cap]]
        initial: SessionState = {
            "target": target,
            "before": before,
            "alert": alert,
            "anchor": anchor,
            "context_text": context_text,
            "pending": queue,
            "current": None,
            "prompt": None,
            "raw_response": None,
            "backend_error": None,
            "attempts": [],
            "status": _RUNNING,
            "patched": None,
        }
        final = self.graph.invoke(initial, config={"recursion_limit": 3 * len(queue) + 10})
        session.attempts = final["attempts"]
        session.status = final["status"]
        session.patched = final.get("patched")
        self.logger.info(f"Session for {session.alert_id} finished: {session.status} after {len(session.attempts)} attempt(s)")
        return session


def retrieve_examples(program: RuleProgram, target: Codebase, before: AnalysisRun, alert: AlertInstance,
                      index: Optional[CorpusIndex], config: RetrievalConfig,
                      logger: Optional[logging.Logger] = None) -> dict[str, list[KeyExample]]:
    """Key examples for `alert`, prioritized and grouped per source."""
    if index is None:
        return {}
    corpus = select_corpus(index, program, config.literal_top_k, config.literal_min_len)
    examples = identify_key_examples(program, before, alert, corpus, config, logger)
    _, query = alert_context(program, target, alert, config.alert_context)
    return prioritize(examples, query, config)


def run_session(program: RuleProgram, target: Codebase, alert: AlertInstance, index: Optional[CorpusIndex],
                config: RetrievalConfig, backend: ChatBackend, metadata: Optional[RuleMetadata] = None,
                language: str = "MiniLang", logger: Optional[logging.Logger] = None,
                examples: Optional[dict[str, list[KeyExample]]] = None) -> RepairSession:
    """
    Repair one alert: a first attempt without an example, then one attempt per
    prioritized key example, source by source, until re-analysis shows the alert
    gone. Pass `examples` to skip retrieval.
    """
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    metadata = metadata or RuleMetadata(program.rule_id, program.rule_id, program.rule_id)
    alert_id = format_alert_id(program, alert)
    try:
        before = run_analysis(program, target)
    except AnalysisError as e:
        logger.error(f"Target analysis failed: {e}")
        return RepairSession(program.rule_id, alert_id, [], status=ERROR, error=str(e))
    if alert not in before.alerts:
        return RepairSession(program.rule_id, alert_id, [], status=ERROR, error=f"{alert_id} is not reported on the target")

    if examples is None:
        examples = retrieve_examples(program, target, before, alert, index, config, logger)
    loop = RepairLoop(program, backend, config, metadata, language, logger)
    return loop.run(target, before, alert, examples)
