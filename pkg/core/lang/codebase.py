# core/lang/codebase.py

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional

from core.errors import PredifixError
from core.lang.source import SourceFile, parse_file

SOURCE_SUFFIX = ".ml"


class UndecodableSource(PredifixError):
    """A source file that is not valid UTF-8."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: not valid UTF-8 ({reason})")
        self.path = path
        self.reason = reason


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_source(path) -> str:
    """File text exactly as stored: UTF-8, line endings untranslated."""
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def write_source(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


@dataclass(frozen=True)
class Codebase:
    """
    A set of MiniLang files keyed by POSIX path relative to the codebase root.
    Holds raw text only: patched codebases may no longer parse, and that is
    for the analysis step to report.
    """

    id: str
    texts: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "texts", MappingProxyType(dict(sorted(self.texts.items()))))

    @classmethod
    def load(cls, root, codebase_id: str | None = None, undecodable: Optional[list] = None) -> "Codebase":
        """
        Read every source file under `root`. A file that is not UTF-8 raises
        UndecodableSource, unless `undecodable` is given: then (path, reason)
        is appended to it and the file left out.
        """
        root = Path(root)
        texts = {}
        for path in sorted(root.rglob(f"*{SOURCE_SUFFIX}")):
            if not path.is_file():
                continue
            rel = path.relative_to(root).as_posix()
            try:
                texts[rel] = read_source(path)
            except UnicodeDecodeError as e:
                if undecodable is None:
                    raise UndecodableSource(rel, e.reason) from e
                undecodable.append((rel, f"not valid UTF-8: {e.reason}"))
        return cls(codebase_id or root.name, texts)

    @property
    def paths(self) -> list[str]:
        return list(self.texts)

    def parse(self) -> list[SourceFile]:
        """Parse every file in path order; the first ParseError propagates."""
        return [parse_file(path, text) for path, text in self.texts.items()]

    def with_text(self, path: str, text: str) -> "Codebase":
        texts = dict(self.texts)
        texts[path] = text
        return Codebase(self.id, texts)

    def without(self, paths) -> "Codebase":
        drop = set(paths)
        return Codebase(self.id, {p: t for p, t in self.texts.items() if p not in drop})

    def digests(self) -> dict[str, str]:
        return {path: text_digest(text) for path, text in self.texts.items()}

    @property
    def digest(self) -> str:
        hasher = hashlib.sha256()
        for path, digest in self.digests().items():
            hasher.update(f"{path}\0{digest}\n".encode("utf-8"))
        return hasher.hexdigest()
