# core/corpus/manifest.py

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from core.errors import PredifixError

SOURCE_KINDS = ("popular", "literal", "target", "user")


class ManifestError(PredifixError):
    def __init__(self, message: str, source: Optional[str] = None):
        super().__init__(f"source {source!r}: {message}" if source else message)
        self.source = source


@dataclass(frozen=True)
class CorpusSource:
    name: str
    kind: str
    path: Path
    priority: int
    order: int  # position in the manifest


@dataclass(frozen=True)
class CorpusManifest:
    sources: tuple

    def source(self, name: str) -> CorpusSource:
        for src in self.sources:
            if src.name == name:
                return src
        raise ManifestError("not in manifest", source=name)

    def to_dict(self) -> dict:
        return {
            "sources": [
                {"name": s.name, "kind": s.kind, "path": str(s.path), "priority": s.priority}
                for s in self.sources
            ]
        }


def parse_manifest(data, base_dir: Path, check_paths: bool = True) -> CorpusManifest:
    """
    Validate manifest data. Relative source paths resolve against `base_dir`.
    Raises ManifestError naming the offending source where there is one.
    """
    if not isinstance(data, dict) or not isinstance(data.get("sources"), list):
        raise ManifestError('manifest must be an object with a "sources" list')

    sources, seen = [], set()
    for order, entry in enumerate(data["sources"]):
        if not isinstance(entry, dict):
            raise ManifestError(f"entry {order} is not an object")
        name = entry.get("name")
        if not isinstance(name, str) or not name or "/" in name:
            raise ManifestError(f"entry {order} needs a non-empty name without '/'")
        if name in seen:
            raise ManifestError("duplicate source name", source=name)
        seen.add(name)

        kind = entry.get("kind")
        if kind not in SOURCE_KINDS:
            raise ManifestError(f"kind must be one of {', '.join(SOURCE_KINDS)}", source=name)
        priority = entry.get("priority", 0)
        if not isinstance(priority, int) or isinstance(priority, bool):
            raise ManifestError("priority must be an integer", source=name)
        raw_path = entry.get("path")
        if not isinstance(raw_path, str) or not raw_path:
            raise ManifestError("path must be a non-empty string", source=name)

        path = Path(raw_path)
        if not path.is_absolute():
            path = Path(base_dir) / path
        path = path.resolve()
        if check_paths and not path.is_dir():
            raise ManifestError(f"path does not exist: {raw_path}", source=name)
        sources.append(CorpusSource(name, kind, path, priority, order))
    return CorpusManifest(tuple(sources))


def load_manifest(path) -> CorpusManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}")
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}")
    return parse_manifest(data, path.parent)
