# core/lang/facts.py

"""
Fact extraction: turns parsed MiniLang files into the fixed EDB schema.

    assignStmt(v: sym, e: sym, l: loc)      varDef(v: sym, l: loc)
    varUse(v: sym, l: loc)                  methodCall(v: sym, m: sym, l: loc)
    callArgStr(l: loc, i: num, s: sym)      callArgVar(l: loc, i: num, v: sym)
    constructorCall(e: sym)                 constructorName(e: sym, n: sym)
    ctorArgVar(e: sym, i: num, v: sym)      assertStmt(v: sym, op: sym, e: sym, l: loc)
    controlFlowTo(l0: loc, l1: loc)
"""

from collections import defaultdict
from typing import Iterable

from core.datalog.facts import FactSet
from core.lang.codebase import Codebase
from core.lang.source import (
    Assert, Assign, Call, CallStmt, If, Location, New, SourceFile, StrLit, UnknownLocation,
    VarRef, describe, split_lines,
)

EDB_SCHEMA = {
    "assignStmt": (("v", "sym"), ("e", "sym"), ("l", "loc")),
    "varDef": (("v", "sym"), ("l", "loc")),
    "varUse": (("v", "sym"), ("l", "loc")),
    "methodCall": (("v", "sym"), ("m", "sym"), ("l", "loc")),
    "callArgStr": (("l", "loc"), ("i", "num"), ("s", "sym")),
    "callArgVar": (("l", "loc"), ("i", "num"), ("v", "sym")),
    "constructorCall": (("e", "sym"),),
    "constructorName": (("e", "sym"), ("n", "sym")),
    "ctorArgVar": (("e", "sym"), ("i", "num"), ("v", "sym")),
    "assertStmt": (("v", "sym"), ("op", "sym"), ("e", "sym"), ("l", "loc")),
    "controlFlowTo": (("l0", "loc"), ("l1", "loc")),
}


class _Extractor:
    def __init__(self, path: str):
        self.path = path
        self.rows: dict[str, set] = defaultdict(set)

    def emit(self, pred: str, *row):
        self.rows[pred].add(row)

    def expr(self, expr, loc: str):
        """Facts contributed by an expression evaluated at `loc`."""
        if isinstance(expr, VarRef):
            self.emit("varUse", expr.name, loc)
        elif isinstance(expr, New):
            sym = describe(self.path, expr).symbol
            self.emit("constructorCall", sym)
            self.emit("constructorName", sym, expr.class_name)
            for i, arg in enumerate(expr.args):
                if isinstance(arg, VarRef):
                    self.emit("ctorArgVar", sym, i, arg.name)
                self.expr(arg, loc)
        elif isinstance(expr, Call):
            self.call(expr, loc)

    def call(self, call: Call, loc: str):
        self.emit("methodCall", call.receiver, call.method, loc)
        self.emit("varUse", call.receiver, loc)
        for i, arg in enumerate(call.args):
            if isinstance(arg, StrLit):
                self.emit("callArgStr", loc, i, arg.value)
            elif isinstance(arg, VarRef):
                self.emit("callArgVar", loc, i, arg.name)
            self.expr(arg, loc)

    def cond_uses(self, expr, loc: str):
        # `if` conditions contribute variable uses only
        if isinstance(expr, VarRef):
            self.emit("varUse", expr.name, loc)
        elif isinstance(expr, Call):
            self.emit("varUse", expr.receiver, loc)
            for arg in expr.args:
                self.cond_uses(arg, loc)
        elif isinstance(expr, New):
            for arg in expr.args:
                self.cond_uses(arg, loc)

    def statements(self, body: Iterable) -> tuple[str | None, set[str]]:
        """
        Walk a statement list; return (entry location, exit locations).
        Exits of each statement flow to the entry of the next one.
        """
        entry, exits = None, set()
        for stmt in body:
            s_entry, s_exits = self.statement(stmt)
            if entry is None:
                entry = s_entry
            for src in sorted(exits):
                self.emit("controlFlowTo", src, s_entry)
            exits = s_exits
        return entry, exits

    def statement(self, stmt) -> tuple[str, set[str]]:
        loc = str(stmt.loc)
        if isinstance(stmt, Assign):
            sym = describe(self.path, stmt.value).symbol
            self.emit("assignStmt", stmt.target, sym, loc)
            self.emit("varDef", stmt.target, loc)
            self.expr(stmt.value, loc)
        elif isinstance(stmt, CallStmt):
            self.call(stmt.call, loc)
        elif isinstance(stmt, Assert):
            sym = describe(self.path, stmt.value).symbol
            self.emit("assertStmt", stmt.var, stmt.op, sym, loc)
            self.emit("varUse", stmt.var, loc)
            self.expr(stmt.value, loc)
        elif isinstance(stmt, If):
            self.cond_uses(stmt.cond, loc)
            exits = set()
            for branch in (stmt.then_body, stmt.else_body):
                b_entry, b_exits = self.statements(branch or ())
                if b_entry is None:
                    exits.add(loc)
                else:
                    self.emit("controlFlowTo", loc, b_entry)
                    exits |= b_exits
            return loc, exits
        return loc, {loc}


def extract_facts(files: Iterable[SourceFile]) -> FactSet:
    """Extract the EDB facts of a set of parsed files. Deterministic in the file contents."""
    merged: dict[str, set] = defaultdict(set)
    for source in sorted(files, key=lambda f: f.path):
        extractor = _Extractor(source.path)
        extractor.statements(source.statements)
        for pred, rows in extractor.rows.items():
            merged[pred] |= rows
    return FactSet(merged)


def _file_lines(codebase: Codebase, location: Location) -> list[str]:
    text = codebase.texts.get(location.file)
    if text is None:
        raise UnknownLocation(str(location))
    lines, _ = split_lines(text)
    if location.line > len(lines):
        raise UnknownLocation(str(location))
    return lines


def snippet_at(codebase: Codebase, location: Location) -> str:
    """The raw source line at `location`. Raises UnknownLocation."""
    return _file_lines(codebase, location)[location.line - 1]


def context_lines(codebase: Codebase, location: Location, radius: int) -> tuple[int, int, str]:
    """Lines `location` ± radius clipped to the file; returns (first line, last line, text)."""
    lines = _file_lines(codebase, location)
    first = max(1, location.line - radius)
    last = min(len(lines), location.line + radius)
    return first, last, "\n".join(lines[first - 1:last])


def codebase_facts(codebase: Codebase) -> FactSet:
    """Parse every file of `codebase` and extract its facts. ParseError propagates."""
    return extract_facts(codebase.parse())
