# core/datalog/engine.py

"""
Bottom-up evaluation under stratified semantics.

`evaluate` is semi-naive per stratum; `evaluate_naive` recomputes every rule
until nothing changes and exists as the reference the fast path is tested against.
"""

from dataclasses import dataclass
from typing import Iterator, Mapping

from core.datalog.facts import FactSet, TypeMismatch
from core.datalog.program import Const, Literal, Rule, RuleProgram, Var


@dataclass(frozen=True, order=True)
class AlertInstance:
    rule_id: str
    predicate: str
    args: tuple

    def locations(self, program: RuleProgram) -> list[str]:
        """Loc-typed arguments in declaration order."""
        return [self.args[i] for i in program.decl(self.predicate).loc_indices]


class _Relation:
    """Tuple set with lazily built indexes keyed by bound argument positions."""

    __slots__ = ("rows", "_indexes")

    def __init__(self, rows=()):
        self.rows = set(rows)
        self._indexes: dict[tuple, dict] = {}

    def lookup(self, positions: tuple, values: tuple):
        if not positions:
            return self.rows
        index = self._indexes.get(positions)
        if index is None:
            index = {}
            for row in self.rows:
                index.setdefault(tuple(row[p] for p in positions), []).append(row)
            self._indexes[positions] = index
        return index.get(values, ())

    def exists(self, positions: tuple, values: tuple) -> bool:
        return bool(self.lookup(positions, values))


def _bound_key(lit: Literal, binding: Mapping[str, object]) -> tuple[tuple, tuple]:
    positions, values = [], []
    for i, term in enumerate(lit.atom.args):
        if isinstance(term, Const):
            positions.append(i)
            values.append(term.value)
        elif isinstance(term, Var) and term.name in binding:
            positions.append(i)
            values.append(binding[term.name])
    return tuple(positions), tuple(values)


def _extend(lit: Literal, row: tuple, binding: dict) -> dict | None:
    new = dict(binding)
    for term, value in zip(lit.atom.args, row):
        if isinstance(term, Var):
            seen = new.get(term.name, _MISSING)
            if seen is _MISSING:
                new[term.name] = value
            elif seen != value:
                return None
    return new


_MISSING = object()


def _solve(rule: Rule, relations: Mapping[str, _Relation], delta_at: int | None = None,
           delta: _Relation | None = None) -> Iterator[tuple]:
    """
    Enumerate head tuples of `rule`. When `delta_at` is given, the positive body
    literal at that index reads from `delta` instead of the full relation.
    Negated literals are filters applied once all their variables are bound.
    """
    positives = [(i, lit) for i, lit in enumerate(rule.body) if lit.positive]
    negatives = [lit for lit in rule.body if not lit.positive]
    empty = _Relation()

    def walk(k: int, binding: dict):
        if k == len(positives):
            for lit in negatives:
                positions, values = _bound_key(lit, binding)
                if relations.get(lit.atom.pred, empty).exists(positions, values):
                    return
            yield tuple(binding[t.name] if isinstance(t, Var) else t.value for t in rule.head.args)
            return
        index, lit = positives[k]
        source = delta if index == delta_at else relations.get(lit.atom.pred, empty)
        positions, values = _bound_key(lit, binding)
        for row in source.lookup(positions, values):
            extended = _extend(lit, row, binding)
            if extended is not None:
                yield from walk(k + 1, extended)

    yield from walk(0, {})


def _prepare(program: RuleProgram, edb: FactSet) -> dict[str, _Relation]:
    stray = set(edb.predicates()) - set(program.inputs)
    if stray:
        raise TypeMismatch(f"facts given for non-input predicates: {sorted(stray)}")
    edb.check(program.signatures)
    return {name: _Relation(edb.get(name)) for name in program.decls}


def _to_factset(relations: Mapping[str, _Relation]) -> FactSet:
    return FactSet({name: rel.rows for name, rel in relations.items()})


def evaluate(program: RuleProgram, edb: FactSet) -> FactSet:
    """Least model of `program` over `edb` (EDB plus all derived facts). Semi-naive per stratum."""
    relations = _prepare(program, edb)
    for stratum in program.strata:
        rules = [r for r in program.rules if r.head.pred in stratum]
        deltas: dict[str, set] = {p: set() for p in stratum}
        for rule in rules:
            for row in _solve(rule, relations):
                if row not in relations[rule.head.pred].rows:
                    deltas[rule.head.pred].add(row)
        recursive = [
            (rule, [i for i, lit in enumerate(rule.body) if lit.positive and lit.atom.pred in stratum])
            for rule in rules
        ]
        recursive = [(rule, idx) for rule, idx in recursive if idx]
        while any(deltas.values()):
            for pred, rows in deltas.items():
                relations[pred] = _Relation(relations[pred].rows | rows)
            delta_rel = {pred: _Relation(rows) for pred, rows in deltas.items()}
            new: dict[str, set] = {p: set() for p in stratum}
            for rule, positions in recursive:
                for i in positions:
                    d = delta_rel[rule.body[i].atom.pred]
                    if not d.rows:
                        continue
                    for row in _solve(rule, relations, delta_at=i, delta=d):
                        if row not in relations[rule.head.pred].rows:
                            new[rule.head.pred].add(row)
            deltas = new
    return _to_factset(relations)


def evaluate_naive(program: RuleProgram, edb: FactSet) -> FactSet:
    """Reference evaluator: re-fire every rule of a stratum until a fixed point."""
    relations = _prepare(program, edb)
    for stratum in program.strata:
        rules = [r for r in program.rules if r.head.pred in stratum]
        changed = True
        while changed:
            changed = False
            derived = [(rule.head.pred, row) for rule in rules for row in _solve(rule, relations)]
            for pred, row in derived:
                if row not in relations[pred].rows:
                    relations[pred] = _Relation(relations[pred].rows | {row})
                    changed = True
    return _to_factset(relations)


def alerts_of(program: RuleProgram, full_facts: FactSet) -> frozenset:
    """One AlertInstance per tuple of the alert predicate."""
    return frozenset(
        AlertInstance(program.rule_id, program.alert_pred, row)
        for row in full_facts.get(program.alert_pred)
    )
