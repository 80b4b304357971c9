# core/datalog/negation.py

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from core.datalog.program import (
    Literal, NonStratified, Rule, RuleProgram, UnknownPredicate, UnsafeRule, build_program,
)


class SkipReason(str, Enum):
    NOT_A_BODY_PREDICATE = "not-a-body-predicate"
    ALERT_PREDICATE = "alert-predicate"
    UNSAFE_AFTER_FLIP = "unsafe-after-flip"
    NON_STRATIFIED_AFTER_FLIP = "non-stratified-after-flip"


@dataclass(frozen=True)
class NegationOutcome:
    program: Optional[RuleProgram] = None
    skip: Optional[SkipReason] = None

    @property
    def ok(self) -> bool:
        return self.program is not None


def negate_predicate(program: RuleProgram, pred_name: str) -> NegationOutcome:
    """
    Flip the polarity of every body literal over `pred_name`, leaving heads alone,
    and re-validate. Flips that break safety or stratification come back as skips.
    """
    if pred_name not in program.decls:
        raise UnknownPredicate(pred_name)
    if pred_name == program.alert_pred:
        return NegationOutcome(skip=SkipReason.ALERT_PREDICATE)
    if pred_name not in program.body_predicates():
        return NegationOutcome(skip=SkipReason.NOT_A_BODY_PREDICATE)

    flipped = tuple(
        Rule(rule.head, tuple(flip_literal(lit, pred_name) for lit in rule.body))
        for rule in program.rules
    )
    try:
        negated = build_program(program.rule_id, program.decls, program.alert_pred, flipped)
    except UnsafeRule:
        return NegationOutcome(skip=SkipReason.UNSAFE_AFTER_FLIP)
    except NonStratified:
        return NegationOutcome(skip=SkipReason.NON_STRATIFIED_AFTER_FLIP)
    return NegationOutcome(program=negated)


def flip_literal(lit: Literal, pred_name: str) -> Literal:
    return lit.flipped() if lit.atom.pred == pred_name else lit
