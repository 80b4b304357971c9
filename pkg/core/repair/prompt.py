# core/repair/prompt.py

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from langchain_core.messages import BaseMessage, HumanMessage, SystemMessage

from core.analyzer import DEFAULT_LOGGER
from core.datalog.engine import AlertInstance
from core.datalog.program import RuleProgram
from core.lang.codebase import Codebase
from core.lang.facts import context_lines
from core.lang.source import Location
from core.retrieval.key_examples import KeyExample

META_SUFFIX = ".meta.json"
SAFE_EXAMPLE_INTRO = "Below code snippet is a safe example. You can use it if helpful."

SYSTEM_TEMPLATE = (
    "You are a programming assistant that repairs security vulnerabilities in {language} code. "
    "You will receive a vulnerable code snippet together with a description of the problem. "
    "Explain the fix in a few sentences, then give the change as JSON.\n\n"
    "The JSON is a list with one object per changed line: `old_line` holds the exact line "
    "to change and `new_line` holds its replacement. Example format:\n\n"
    "```json\n"
    '[{{ "old_line": "int x = 1;",\n'
    '   "new_line": "int x = 1; x++;" }}]\n'
    "```"
)


@dataclass(frozen=True)
class RuleMetadata:
    rule_id: str
    name: str
    description: str
    severity: str = ""

    @classmethod
    def load(cls, rules_path, logger: Optional[logging.Logger] = None) -> "RuleMetadata":
        """Read `<rule>.meta.json` next to the rule file; missing or empty fields fall back to the rule id."""
        logger = logger or logging.getLogger(DEFAULT_LOGGER)
        rules_path = Path(rules_path)
        rule_id = rules_path.stem
        meta_path = rules_path.with_name(rule_id + META_SUFFIX)
        data = {}
        try:
            data = json.loads(meta_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            logger.info(f"No rule metadata at {meta_path}; using the rule id")
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Could not read rule metadata {meta_path}: {e}")
        if not isinstance(data, dict):
            data = {}
        return cls(
            rule_id=rule_id,
            name=str(data.get("name") or rule_id),
            description=str(data.get("description") or rule_id),
            severity=str(data.get("severity") or ""),
        )


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    example: Optional[KeyExample] = None

    def messages(self) -> list[BaseMessage]:
        return [SystemMessage(content=self.system_text), HumanMessage(content=self.user_text)]


def alert_context(program: RuleProgram, codebase: Codebase, alert: AlertInstance, radius: int) -> tuple[Optional[Location], str]:
    """The first location of the alert and the code `radius` lines around it."""
    locations = alert.locations(program)
    if not locations:
        return None, ""
    loc = Location.parse(locations[0])
    _, _, text = context_lines(codebase, loc, radius)
    return loc, text


def build_prompt(metadata: RuleMetadata, alert_context_text: str, example: Optional[KeyExample] = None,
                 language: str = "MiniLang") -> PromptBundle:
    user = (
        f"Vulnerability description: {metadata.name}: {metadata.description}\n\n"
        f"Code snippet:\n```\n{alert_context_text}\n```"
    )
    if example is not None:
        user += f"\n\n{SAFE_EXAMPLE_INTRO}\n\n```\n{example.context_text}\n```"
    return PromptBundle(SYSTEM_TEMPLATE.format(language=language), user, example)
