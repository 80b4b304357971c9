# core/datalog/program.py

"""
Rule programs: the analysis rules run by the engine.

Rule-file syntax:

    .input  name(p: type, ...)        extensional predicate (facts come from extraction)
    .decl   name(p: type, ...)        intensional predicate
    .alert  name(p: type, ...)        the single intensional predicate reported as alerts
    .import "path/to/lib.dl"          merge a library file (its predicates are marked library)
    head(X, "c", 3) :- lit, !lit, ... .
    # comment

Types are sym, num and loc. Variables start with an uppercase letter, `_` is a
wildcard, constants are double-quoted strings or integers.
"""

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Union

from core.datalog.facts import PARAM_TYPES, check_value
from core.errors import PredifixError


class RuleParseError(PredifixError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnsafeRule(PredifixError):
    def __init__(self, rule_index: int, variable: str):
        super().__init__(f"rule {rule_index}: variable {variable} is not bound by a positive body literal")
        self.rule_index = rule_index
        self.variable = variable


class NonStratified(PredifixError):
    def __init__(self, cycle: tuple):
        super().__init__(f"negation inside recursive cycle: {' -> '.join(cycle)}")
        self.cycle = cycle


class UnknownPredicate(PredifixError):
    def __init__(self, name: str):
        super().__init__(f"unknown predicate {name!r}")
        self.name = name


# ── Terms, atoms, rules ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: Union[str, int]

    def __str__(self):
        if isinstance(self.value, int):
            return str(self.value)
        escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


@dataclass(frozen=True)
class Wildcard:
    def __str__(self):
        return "_"


WILDCARD = Wildcard()
Term = Union[Var, Const, Wildcard]


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple

    def variables(self) -> set[str]:
        return {t.name for t in self.args if isinstance(t, Var)}

    def __str__(self):
        return f"{self.pred}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def flipped(self) -> "Literal":
        return Literal(self.atom, not self.positive)

    def __str__(self):
        return str(self.atom) if self.positive else f"!{self.atom}"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(lit) for lit in self.body)}."


@dataclass(frozen=True)
class Param:
    name: str
    type: str


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: tuple
    kind: str  # "input" | "decl" | "alert"
    library: bool = False

    @property
    def types(self) -> tuple:
        return tuple(p.type for p in self.params)

    @property
    def loc_indices(self) -> tuple:
        return tuple(i for i, p in enumerate(self.params) if p.type == "loc")

    def __str__(self):
        params = ", ".join(f"{p.name}: {p.type}" for p in self.params)
        return f".{self.kind} {self.name}({params})"


@dataclass(frozen=True)
class RuleProgram:
    """A validated analysis rule. Build through `parse_program` or `build_program` only."""

    rule_id: str
    decls: Mapping[str, PredicateDecl]
    alert_pred: str
    rules: tuple
    strata: tuple  # ordered frozensets of intensional predicates

    @property
    def inputs(self) -> tuple:
        return tuple(name for name, d in self.decls.items() if d.kind == "input")

    @property
    def signatures(self) -> dict[str, tuple]:
        return {name: d.types for name, d in self.decls.items()}

    def decl(self, name: str) -> PredicateDecl:
        if name not in self.decls:
            raise UnknownPredicate(name)
        return self.decls[name]

    def body_predicates(self) -> set[str]:
        return {lit.atom.pred for rule in self.rules for lit in rule.body}

    def string_constants(self) -> list[str]:
        """String constants appearing in rule bodies, first-occurrence order."""
        seen = {}
        for rule in self.rules:
            for lit in rule.body:
                for term in lit.atom.args:
                    if isinstance(term, Const) and isinstance(term.value, str):
                        seen.setdefault(term.value, None)
        return list(seen)

    @property
    def digest(self) -> str:
        return hashlib.sha256(render_program(self).encode("utf-8")).hexdigest()


def render_program(program: RuleProgram) -> str:
    """Canonical text of a program: declarations then rules, one per line."""
    lines = [str(d) for d in program.decls.values()]
    lines += [str(r) for r in program.rules]
    return "\n".join(lines) + "\n"


# ── Tokenizer / parser ───────────────────────────────────────────────────────

_TOKEN_REGEX = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<directive>\.(?:input|decl|alert|import)\b)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:-|[(),.:!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    value: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    tokens, pos, line = [], 0, 1
    while pos < len(text):
        m = _TOKEN_REGEX.match(text, pos)
        if not m:
            raise RuleParseError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind not in ("ws", "comment"):
            tokens.append(_Tok(kind, m.group(), line))
        pos = m.end()
    return tokens


def _unquote(raw: str) -> str:
    return re.sub(r"\\(.)", lambda m: m.group(1), raw[1:-1])


class _RuleFileParser:
    def __init__(self, tokens: list[_Tok]):
        self.tokens = tokens
        self.pos = 0

    def _peek(self) -> Optional[_Tok]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> _Tok:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1].line if self.tokens else 1
            raise RuleParseError("unexpected end of input", last)
        self.pos += 1
        return tok

    def _expect(self, kind: str, value: Optional[str] = None) -> _Tok:
        tok = self._next()
        if tok.kind != kind or (value is not None and tok.value != value):
            raise RuleParseError(f"expected {value or kind}, found {tok.value!r}", tok.line)
        return tok

    def _at(self, value: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.kind == "op" and tok.value == value

    def parse(self):
        decls, rules, imports = [], [], []
        while self._peek() is not None:
            tok = self._peek()
            if tok.kind == "directive":
                self._next()
                if tok.value == ".import":
                    imports.append((_unquote(self._expect("string").value), tok.line))
                else:
                    decls.append((self._declaration(tok.value[1:]), tok.line))
            else:
                rules.append((self._rule(), tok.line))
        return decls, rules, imports

    def _declaration(self, kind: str) -> PredicateDecl:
        name = self._expect("ident").value
        self._expect("op", "(")
        params = []
        if not self._at(")"):
            while True:
                pname = self._expect("ident").value
                self._expect("op", ":")
                ptype = self._expect("ident")
                if ptype.value not in PARAM_TYPES:
                    raise RuleParseError(f"unknown type {ptype.value!r}", ptype.line)
                params.append(Param(pname, ptype.value))
                if not self._at(","):
                    break
                self._next()
        self._expect("op", ")")
        return PredicateDecl(name, tuple(params), kind)

    def _rule(self) -> Rule:
        head = self._atom()
        body = []
        if self._at(":-"):
            self._next()
            while True:
                positive = True
                if self._at("!"):
                    self._next()
                    positive = False
                body.append(Literal(self._atom(), positive))
                if not self._at(","):
                    break
                self._next()
        self._expect("op", ".")
        return Rule(head, tuple(body))

    def _atom(self) -> Atom:
        name = self._expect("ident")
        if name.value[0].isupper() or name.value == "_":
            raise RuleParseError(f"predicate name expected, found variable {name.value!r}", name.line)
        self._expect("op", "(")
        args = []
        if not self._at(")"):
            while True:
                args.append(self._term())
                if not self._at(","):
                    break
                self._next()
        self._expect("op", ")")
        return Atom(name.value, tuple(args))

    def _term(self) -> Term:
        tok = self._next()
        if tok.kind == "string":
            return Const(_unquote(tok.value))
        if tok.kind == "number":
            return Const(int(tok.value))
        if tok.kind == "ident":
            if tok.value == "_":
                return WILDCARD
            if tok.value[0].isupper():
                return Var(tok.value)
        raise RuleParseError(f"expected a variable, constant or '_', found {tok.value!r}", tok.line)


# ── Validation ───────────────────────────────────────────────────────────────

def _check_types(decls: Mapping[str, PredicateDecl], rules: list[tuple[Rule, int]]):
    for rule, line in rules:
        var_types: dict[str, str] = {}
        atoms = [rule.head] + [lit.atom for lit in rule.body]
        for atom in atoms:
            decl = decls.get(atom.pred)
            if decl is None:
                raise RuleParseError(f"undeclared predicate {atom.pred!r}", line)
            if len(atom.args) != len(decl.params):
                raise RuleParseError(
                    f"{atom.pred} expects {len(decl.params)} arguments, got {len(atom.args)}", line
                )
            for term, param in zip(atom.args, decl.params):
                if isinstance(term, Const) and not check_value(term.value, param.type):
                    raise RuleParseError(f"constant {term} is not of type {param.type} in {atom.pred}", line)
                if isinstance(term, Var):
                    seen = var_types.setdefault(term.name, param.type)
                    if seen != param.type:
                        raise RuleParseError(f"variable {term.name} used as both {seen} and {param.type}", line)
        if any(isinstance(t, Wildcard) for t in rule.head.args):
            raise RuleParseError("wildcard '_' is not allowed in a rule head", line)
        head_decl = decls[rule.head.pred]
        if head_decl.kind == "input":
            raise RuleParseError(f"input predicate {rule.head.pred!r} cannot appear in a rule head", line)


def check_safety(rules: Iterable[Rule]) -> None:
    """Raise UnsafeRule unless every head/negated variable is bound by a positive body literal."""
    for index, rule in enumerate(rules):
        bound = set()
        for lit in rule.body:
            if lit.positive:
                bound |= lit.atom.variables()
        needed = list(rule.head.args)
        for lit in rule.body:
            if not lit.positive:
                needed += list(lit.atom.args)
        for term in needed:
            if isinstance(term, Var) and term.name not in bound:
                raise UnsafeRule(index, term.name)


def _components(nodes: list[str], edges: Mapping[str, set[str]]) -> list[list[str]]:
    """Strongly connected components (Tarjan), returned dependencies-first."""
    index_of, low, on_stack, stack, result = {}, {}, set(), [], []
    counter = [0]

    def visit(v):
        index_of[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in sorted(edges.get(v, ())):
            if w not in index_of:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index_of[w])
        if low[v] == index_of[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            result.append(sorted(comp))

    for v in nodes:
        if v not in index_of:
            visit(v)
    return result


def _find_cycle(head: str, dep: str, edges: Mapping[str, set[str]], members: set[str]) -> tuple:
    """The cycle closed by the negative edge head -> dep: (head, dep, ..., head)."""
    if head == dep:
        return (head, head)
    parent = {dep: None}
    queue = [dep]
    while queue:
        node = queue.pop(0)
        if node == head:
            break
        for nxt in sorted(edges.get(node, ())):
            if nxt in members and nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path, node = [], head
    while node is not None:
        path.append(node)
        node = parent[node]
    return (head,) + tuple(reversed(path))


def stratify(decls: Mapping[str, PredicateDecl], rules: Iterable[Rule]) -> tuple:
    """
    Layer the intensional predicates. Each strongly connected component is a
    stratum, placed one level above the highest component it depends on.
    Raises NonStratified when a negative edge lies inside a component.
    """
    idb = [name for name, d in decls.items() if d.kind != "input"]
    edges: dict[str, set[str]] = {name: set() for name in idb}
    negative: set[tuple[str, str]] = set()
    for rule in rules:
        for lit in rule.body:
            if decls[lit.atom.pred].kind == "input":
                continue
            edges[rule.head.pred].add(lit.atom.pred)
            if not lit.positive:
                negative.add((rule.head.pred, lit.atom.pred))

    components = _components(sorted(idb), edges)
    comp_of = {name: i for i, comp in enumerate(components) for name in comp}
    for head, dep in sorted(negative):
        if comp_of[head] == comp_of[dep]:
            members = set(components[comp_of[head]])
            raise NonStratified(_find_cycle(head, dep, edges, members))

    level: dict[int, int] = {}
    for i, comp in enumerate(components):
        deps = {comp_of[d] for name in comp for d in edges[name]} - {i}
        level[i] = 1 + max((level[d] for d in deps), default=-1)
    layers: dict[int, set] = {}
    for i, comp in enumerate(components):
        layers.setdefault(level[i], set()).update(comp)
    return tuple(frozenset(layers[k]) for k in sorted(layers))


def build_program(rule_id: str, decls: Mapping[str, PredicateDecl], alert_pred: str, rules: Iterable[Rule]) -> RuleProgram:
    """Validate and assemble a program. Raises UnsafeRule / NonStratified."""
    rules = tuple(rules)
    check_safety(rules)
    strata = stratify(decls, rules)
    return RuleProgram(
        rule_id=rule_id,
        decls=MappingProxyType(dict(decls)),
        alert_pred=alert_pred,
        rules=rules,
        strata=strata,
    )


Loader = Callable[[str], str]


def _collect(text: str, loader: Optional[Loader], library: bool, seen: set[str]):
    decls, rules, imports = _RuleFileParser(_tokenize(text)).parse()
    all_decls: list[tuple[PredicateDecl, int]] = []
    all_rules: list[tuple[Rule, int]] = []
    for target, line in imports:
        if loader is None:
            raise RuleParseError(f"cannot resolve import {target!r} without a base directory", line)
        if target in seen:
            continue
        seen.add(target)
        try:
            imported = loader(target)
        except OSError as e:
            raise RuleParseError(f"cannot read import {target!r}: {e}", line)
        sub_decls, sub_rules = _collect(imported, loader, True, seen)
        all_decls += sub_decls
        all_rules += sub_rules
    for decl, line in decls:
        if library:
            decl = PredicateDecl(decl.name, decl.params, decl.kind, library=True)
        all_decls.append((decl, line))
    all_rules += rules
    return all_decls, all_rules


def parse_program(text: str, rule_id: str, base_dir: Optional[Path] = None) -> RuleProgram:
    """
    Parse and validate a rule file. `.import` paths resolve against `base_dir`.
    Raises RuleParseError, UnsafeRule or NonStratified.
    """
    loader = None
    if base_dir is not None:
        base = Path(base_dir)
        loader = lambda rel: (base / rel).read_text(encoding="utf-8")  # noqa: E731
    decl_list, rule_list = _collect(text, loader, False, set())

    decls: dict[str, PredicateDecl] = {}
    for decl, line in decl_list:
        if decl.name in decls:
            if decls[decl.name].params == decl.params and decls[decl.name].kind == decl.kind:
                if not decl.library:
                    decls[decl.name] = decl
                continue
            raise RuleParseError(f"predicate {decl.name!r} declared twice", line)
        decls[decl.name] = decl

    alerts = [d.name for d in decls.values() if d.kind == "alert"]
    if len(alerts) != 1:
        raise RuleParseError(f"exactly one .alert predicate is required, found {len(alerts)}")

    _check_types(decls, rule_list)
    return build_program(rule_id, decls, alerts[0], [rule for rule, _ in rule_list])


def load_program(path) -> RuleProgram:
    """Read a rule file from disk; rule_id is the file stem."""
    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), path.stem, base_dir=path.parent)
