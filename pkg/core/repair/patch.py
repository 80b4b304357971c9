# core/repair/patch.py

"""
Line-edit patches as answered by the model:

    [{"old_line": "<exact line to change>", "new_line": "<replacement>"}, ...]

`new_line` is inserted verbatim; embedded newlines expand to several lines and
an empty `new_line` deletes the line.
"""

import json
import re
from dataclasses import dataclass
from typing import Optional

from core.errors import PredifixError
from core.lang.codebase import Codebase
from core.lang.source import Location, split_lines

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


class NoPatchFound(PredifixError):
    pass


class MalformedEdit(PredifixError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"edit {index}: {reason}")
        self.index = index
        self.reason = reason


class NoMatchingLine(PredifixError):
    def __init__(self, edit_index: int, old_line: str):
        super().__init__(f"edit {edit_index}: no line matches {old_line.strip()!r}")
        self.edit_index = edit_index


@dataclass(frozen=True)
class LineEdit:
    old_line: str
    new_line: str


@dataclass(frozen=True)
class LinePatch:
    edits: tuple

    def to_list(self) -> list[dict]:
        return [{"old_line": e.old_line, "new_line": e.new_line} for e in self.edits]


def _balanced_arrays(text: str):
    """Yield every top-level '[' ... ']' region, skipping brackets inside JSON strings."""
    depth, start, in_string, escaped = 0, None, False, False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth:
            in_string = True
        elif ch == "[":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "]" and depth:
            depth -= 1
            if depth == 0:
                yield text[start:i + 1]


def _load_array(candidate: str) -> Optional[list]:
    try:
        value = json.loads(candidate)
    except json.JSONDecodeError:
        return None
    return value if isinstance(value, list) else None


def _to_patch(items: list) -> LinePatch:
    if not items:
        raise NoPatchFound("the patch array is empty")
    edits = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise MalformedEdit(i, "not an object")
        for key in ("old_line", "new_line"):
            if not isinstance(item.get(key), str):
                raise MalformedEdit(i, f"missing string field {key!r}")
        if not item["old_line"].strip():
            raise MalformedEdit(i, "old_line is blank")
        edits.append(LineEdit(item["old_line"], item["new_line"]))
    return LinePatch(tuple(edits))


def parse_patch(raw_response: str) -> LinePatch:
    """
    Take the first fenced code block holding a JSON array, else the first
    balanced top-level array in the text. Raises NoPatchFound or MalformedEdit.
    """
    for block in _FENCE.findall(raw_response or ""):
        items = _load_array(block.strip())
        if items is not None:
            return _to_patch(items)
    for region in _balanced_arrays(raw_response or ""):
        items = _load_array(region)
        if items is not None:
            return _to_patch(items)
    raise NoPatchFound("no JSON edit list in the response")


def _find_line(files: dict, old_line: str, anchor: Optional[Location]) -> Optional[tuple[str, int]]:
    wanted = old_line.strip()
    order = sorted(files)
    if anchor is not None and anchor.file in files:
        order.remove(anchor.file)
        order.insert(0, anchor.file)
    for path in order:
        hits = [i for i, line in enumerate(files[path][0], start=1) if line.strip() == wanted]
        if not hits:
            continue
        if anchor is not None and path == anchor.file:
            return path, min(hits, key=lambda n: (abs(n - anchor.line), n))
        return path, hits[0]
    return None


def apply_patch(codebase: Codebase, patch: LinePatch, anchor: Optional[Location] = None) -> Codebase:
    """
    Apply the edits in order against the evolving text. Lines match on trimmed
    content, in the alert's file first (nearest to the alert line wins, then
    the lower line), then in the other files by path. The alert line follows
    lines inserted or deleted above it. Replacement lines take the CRLF ending
    of the line they replace. Raises NoMatchingLine; the input codebase is
    never modified.
    """
    files = {path: split_lines(text) for path, text in codebase.texts.items()}
    touched = set()
    for index, edit in enumerate(patch.edits):
        hit = _find_line(files, edit.old_line, anchor)
        if hit is None:
            raise NoMatchingLine(index, edit.old_line)
        path, line = hit
        lines, trailing = files[path]
        eol = "\r" if lines[line - 1].endswith("\r") else ""
        replacement = [part.rstrip("\r") + eol for part in edit.new_line.split("\n")] if edit.new_line else []
        files[path] = (lines[:line - 1] + replacement + lines[line:], trailing)
        touched.add(path)
        if anchor is not None and anchor.file == path and line < anchor.line:
            anchor = Location(path, anchor.line + len(replacement) - 1)

    patched = codebase
    for path in sorted(touched):
        lines, trailing = files[path]
        text = "\n".join(lines)
        if lines and trailing:
            text += "\n"
        patched = patched.with_text(path, text)
    return patched
