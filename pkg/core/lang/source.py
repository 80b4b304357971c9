# core/lang/source.py

"""
MiniLang parser.

MiniLang is a small imperative language: one statement per physical line,
`{` / `}` block braces, `#` comments. Grammar:

    stmt  := IDENT "=" expr ";"
           | IDENT "." IDENT "(" args? ")" ";"
           | "assert" IDENT ("!=" | "==") expr ";"
           | "if" "(" expr ")" "{" stmt* "}" ("else" "{" stmt* "}")?
    expr  := "null" | IDENT | STRING | NUMBER
           | "new" IDENT "(" args? ")" | IDENT "." IDENT "(" args? ")"
    args  := expr ("," expr)*

Parsing is all-or-nothing per file: the first violation raises ParseError.
"""

import re
from dataclasses import dataclass
from typing import Optional, Union

from core.errors import PredifixError

KEYWORDS = frozenset({"null", "new", "assert", "if", "else"})


class ParseError(PredifixError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
        self.message = message


class UnknownLocation(PredifixError):
    """Location names a file or line that does not exist in the codebase."""


@dataclass(frozen=True, order=True)
class Location:
    file: str
    line: int

    def __post_init__(self):
        if not self.file or self.line < 1:
            raise ValueError(f"invalid location {self.file!r}:{self.line}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}"

    @classmethod
    def parse(cls, text: str) -> "Location":
        file, sep, line = text.rpartition(":")
        if not sep or not file or not line.isdigit():
            raise ValueError(f"not a location: {text!r}")
        return cls(file, int(line))


# ── Expressions ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class NullLit:
    line: int
    col: int


@dataclass(frozen=True)
class VarRef:
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class StrLit:
    value: str
    line: int
    col: int


@dataclass(frozen=True)
class NumLit:
    value: int
    line: int
    col: int


@dataclass(frozen=True)
class New:
    class_name: str
    args: tuple
    line: int
    col: int


@dataclass(frozen=True)
class Call:
    receiver: str
    method: str
    args: tuple
    line: int
    col: int


Expr = Union[NullLit, VarRef, StrLit, NumLit, New, Call]

_EXPR_KINDS = {NullLit: "null", VarRef: "var", StrLit: "string", NumLit: "number", New: "ctor", Call: "call"}


@dataclass(frozen=True)
class ExprDescriptor:
    symbol: str
    kind: str


def describe(path: str, expr: Expr) -> ExprDescriptor:
    """Occurrence token of an expression; the null literal is always the shared symbol "null"."""
    kind = _EXPR_KINDS[type(expr)]
    if kind == "null":
        return ExprDescriptor("null", kind)
    return ExprDescriptor(f"e{path}:{expr.line}:{expr.col}", kind)


# ── Statements ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    loc: Location


@dataclass(frozen=True)
class CallStmt:
    call: Call
    loc: Location


@dataclass(frozen=True)
class Assert:
    var: str
    op: str
    value: Expr
    loc: Location


@dataclass(frozen=True)
class If:
    cond: Expr
    then_body: tuple
    else_body: Optional[tuple]
    loc: Location


Stmt = Union[Assign, CallStmt, Assert, If]


@dataclass(frozen=True)
class SourceFile:
    path: str
    lines: tuple
    statements: tuple
    trailing_newline: bool = True

    @property
    def text(self) -> str:
        body = "\n".join(self.lines)
        return body + "\n" if self.lines and self.trailing_newline else body

    def line(self, number: int) -> str:
        if number < 1 or number > len(self.lines):
            raise UnknownLocation(f"{self.path}:{number}")
        return self.lines[number - 1]


def split_lines(text: str) -> tuple[list[str], bool]:
    """Split text into lines; the flag records whether a final newline was present."""
    if not text:
        return [], False
    trailing = text.endswith("\n")
    body = text[:-1] if trailing else text
    return body.split("\n"), trailing


# ── Tokenizer ────────────────────────────────────────────────────────────────

_TOKEN_REGEX = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>!=|==|[=.;(),{}])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    col: int


def _unescape(raw: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), raw[1:-1])


def _tokenize(path: str, lines: list[str]) -> list[_Token]:
    tokens: list[_Token] = []
    for lineno, text in enumerate(lines, start=1):
        pos = 0
        while pos < len(text):
            m = _TOKEN_REGEX.match(text, pos)
            if not m:
                raise ParseError(path, lineno, f"unexpected character {text[pos]!r}")
            kind = m.lastgroup
            if kind not in ("ws", "comment"):
                value = m.group()
                if kind == "string":
                    value = _unescape(value)
                elif kind == "ident" and value in KEYWORDS:
                    kind = "kw"
                tokens.append(_Token(kind, value, lineno, pos + 1))
            pos = m.end()
    return tokens


# ── Parser ───────────────────────────────────────────────────────────────────

class _Parser:
    def __init__(self, path: str, tokens: list[_Token], last_line: int):
        self.path = path
        self.tokens = tokens
        self.pos = 0
        self.last_line = max(last_line, 1)
        self._stmt_lines: set[int] = set()

    def _peek(self, offset: int = 0) -> Optional[_Token]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def _error(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self._peek()
        line = tok.line if tok else self.last_line
        raise ParseError(self.path, line, message)

    def _next(self) -> _Token:
        tok = self._peek()
        if tok is None:
            self._error("unexpected end of file")
        self.pos += 1
        return tok

    def _expect(self, value: str) -> _Token:
        tok = self._peek()
        if tok is None or tok.value != value or tok.kind == "string":
            found = "end of file" if tok is None else repr(tok.value)
            self._error(f"expected {value!r}, found {found}")
        return self._next()

    def _ident(self) -> _Token:
        tok = self._peek()
        if tok is None or tok.kind != "ident":
            found = "end of file" if tok is None else repr(tok.value)
            self._error(f"expected identifier, found {found}")
        return self._next()

    def _at(self, value: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.kind != "string" and tok.value == value

    def parse(self) -> tuple:
        body = []
        while self._peek() is not None:
            if self._at("}"):
                self._error("unmatched '}'")
            body.append(self._statement())
        return tuple(body)

    def _block(self) -> tuple:
        self._expect("{")
        body = []
        while not self._at("}"):
            if self._peek() is None:
                self._error("missing '}'")
            body.append(self._statement())
        self._expect("}")
        return tuple(body)

    def _claim_line(self, tok: _Token):
        if tok.line in self._stmt_lines:
            self._error("only one statement per line is allowed", tok)
        self._stmt_lines.add(tok.line)

    def _same_line(self, start: _Token):
        prev = self.tokens[self.pos - 1]
        if prev.line != start.line:
            self._error("a statement must fit on one line", prev)

    def _statement(self) -> Stmt:
        start = self._peek()
        self._claim_line(start)
        loc = Location(self.path, start.line)

        if start.kind == "kw" and start.value == "if":
            self._next()
            self._expect("(")
            cond = self._expr()
            self._expect(")")
            then_body = self._block()
            else_body = None
            if self._at("else"):
                self._next()
                else_body = self._block()
            return If(cond, then_body, else_body, loc)

        if start.kind == "kw" and start.value == "assert":
            self._next()
            var = self._ident().value
            op_tok = self._next()
            if op_tok.value not in ("!=", "==") or op_tok.kind != "op":
                self._error(f"expected '!=' or '==', found {op_tok.value!r}", op_tok)
            value = self._expr()
            self._expect(";")
            self._same_line(start)
            return Assert(var, op_tok.value, value, loc)

        name = self._ident()
        if self._at("="):
            self._next()
            value = self._expr()
            self._expect(";")
            self._same_line(start)
            return Assign(name.value, value, loc)
        if self._at("."):
            call = self._call_tail(name)
            self._expect(";")
            self._same_line(start)
            return CallStmt(call, loc)
        self._error(f"unexpected token after {name.value!r}")

    def _call_tail(self, receiver: _Token) -> Call:
        self._expect(".")
        method = self._ident().value
        args = self._args()
        return Call(receiver.value, method, args, receiver.line, receiver.col)

    def _args(self) -> tuple:
        self._expect("(")
        args = []
        if not self._at(")"):
            args.append(self._expr())
            while self._at(","):
                self._next()
                args.append(self._expr())
        self._expect(")")
        return tuple(args)

    def _expr(self) -> Expr:
        tok = self._peek()
        if tok is None:
            self._error("expected expression, found end of file")
        if tok.kind == "kw" and tok.value == "null":
            self._next()
            return NullLit(tok.line, tok.col)
        if tok.kind == "kw" and tok.value == "new":
            self._next()
            cls = self._ident().value
            return New(cls, self._args(), tok.line, tok.col)
        if tok.kind == "string":
            self._next()
            return StrLit(tok.value, tok.line, tok.col)
        if tok.kind == "number":
            self._next()
            return NumLit(int(tok.value), tok.line, tok.col)
        if tok.kind == "ident":
            self._next()
            if self._at("."):
                return self._call_tail(tok)
            return VarRef(tok.value, tok.line, tok.col)
        self._error(f"expected expression, found {tok.value!r}", tok)


def parse_file(path: str, text: str) -> SourceFile:
    """Parse one MiniLang file into a statement tree. Raises ParseError."""
    lines, trailing = split_lines(text)
    tokens = _tokenize(path, lines)
    statements = _Parser(path, tokens, len(lines)).parse()
    return SourceFile(path=path, lines=tuple(lines), statements=statements, trailing_newline=trailing)
