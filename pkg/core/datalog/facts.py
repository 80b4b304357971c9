# core/datalog/facts.py

import json
from typing import Iterable, Iterator, Mapping

from core.errors import PredifixError
from core.lang.source import Location

PARAM_TYPES = ("sym", "num", "loc")


class TypeMismatch(PredifixError):
    """A tuple does not match the arity or parameter types of its predicate."""


def check_value(value, param_type: str) -> bool:
    if param_type == "num":
        return isinstance(value, int) and not isinstance(value, bool)
    if not isinstance(value, str):
        return False
    if param_type == "loc":
        try:
            Location.parse(value)
        except ValueError:
            return False
    return True


class FactSet:
    """
    Immutable map from predicate name to a set of ground tuples.

    Symbols and locations are str ("<file>:<line>" for locations), numbers are int.
    Iteration and serialization are in canonical (sorted) order so output is byte-stable.
    """

    __slots__ = ("_relations",)

    def __init__(self, relations: Mapping[str, Iterable[tuple]] | None = None):
        rel = {}
        for name, rows in (relations or {}).items():
            frozen = frozenset(tuple(row) for row in rows)
            if frozen:
                rel[name] = frozen
        self._relations = rel

    def get(self, pred: str) -> frozenset:
        return self._relations.get(pred, frozenset())

    def tuples(self, pred: str) -> list[tuple]:
        return sorted(self.get(pred))

    def predicates(self) -> list[str]:
        return sorted(self._relations)

    def project(self, names: Iterable[str]) -> "FactSet":
        keep = set(names)
        return FactSet({k: v for k, v in self._relations.items() if k in keep})

    def union(self, other: "FactSet") -> "FactSet":
        merged = dict(self._relations)
        for name, rows in other._relations.items():
            merged[name] = merged.get(name, frozenset()) | rows
        return FactSet(merged)

    def add(self, pred: str, rows: Iterable[tuple]) -> "FactSet":
        return self.union(FactSet({pred: rows}))

    def check(self, signatures: Mapping[str, tuple]) -> None:
        """Raise TypeMismatch unless every tuple matches `signatures[pred]` (tuple of param types)."""
        for name, rows in self._relations.items():
            if name not in signatures:
                raise TypeMismatch(f"undeclared predicate {name!r} in facts")
            types = signatures[name]
            for row in rows:
                if len(row) != len(types):
                    raise TypeMismatch(f"{name}{row!r}: expected {len(types)} arguments")
                for value, ptype in zip(row, types):
                    if not check_value(value, ptype):
                        raise TypeMismatch(f"{name}{row!r}: {value!r} is not of type {ptype}")

    def to_dict(self) -> dict:
        return {name: [list(row) for row in self.tuples(name)] for name in self.predicates()}

    @classmethod
    def from_dict(cls, data: Mapping[str, list]) -> "FactSet":
        return cls({name: [tuple(row) for row in rows] for name, rows in data.items()})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    def __iter__(self) -> Iterator[tuple[str, tuple]]:
        for name in self.predicates():
            for row in self.tuples(name):
                yield name, row

    def __len__(self) -> int:
        return sum(len(rows) for rows in self._relations.values())

    def __contains__(self, fact) -> bool:
        name, row = fact
        return tuple(row) in self.get(name)

    def __eq__(self, other) -> bool:
        return isinstance(other, FactSet) and self._relations == other._relations

    def __hash__(self):
        return hash(frozenset(self._relations.items()))

    def __repr__(self) -> str:
        return f"FactSet({len(self)} facts in {len(self._relations)} predicates)"
