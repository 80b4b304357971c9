# core/corpus/index_storage.py

"""
On-disk corpus index.

    <dir>/index.json          manifest snapshot, codebases, file texts + SHA-256 digests
    <dir>/facts/<id>.json     extracted facts per codebase, keyed by the codebase digest
    <dir>/cleanliness.json    "<rule digest>:<codebase digest>" -> bool

Every file carries a "version" field. Writes are atomic (temp file + os.replace)
and files are created with mode 0o600.
"""

import json
import logging
import os
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Optional

from core.analyzer import DEFAULT_LOGGER
from core.corpus.index import CorpusIndex, IndexedCodebase
from core.corpus.manifest import ManifestError, parse_manifest
from core.datalog.facts import FactSet
from core.errors import PredifixError
from core.lang.codebase import Codebase, text_digest
from core.lang.facts import codebase_facts

INDEX_VERSION = 1
INDEX_FILE = "index.json"
CLEANLINESS_FILE = "cleanliness.json"
FACTS_DIR = "facts"


class IndexStorageError(PredifixError):
    pass


def _datetime_now_str() -> str:
    return datetime.now().strftime("%Y-%m-%dT%H-%M-%S")


def atomic_write_json(data, target_path, logger: Optional[logging.Logger] = None) -> None:
    """Write JSON (sorted keys) through a temp file in the target directory, then os.replace."""
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    target = Path(target_path)
    target.parent.mkdir(mode=0o700, parents=True, exist_ok=True)
    tmp_name = None
    try:
        with tempfile.NamedTemporaryFile(
            mode="w", encoding="utf-8", dir=target.parent, delete=False, prefix=".tmp_", suffix=".json"
        ) as tmp:
            tmp_name = tmp.name
            json.dump(data, tmp, ensure_ascii=False, indent=2, sort_keys=True)
            tmp.write("\n")
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, target)
        try:
            os.chmod(target, 0o600)
        except OSError as e:
            logger.warning(f"Could not set permissions on '{target}': {e}")
    except OSError as e:
        raise IndexStorageError(f"failed to write {target}: {e}") from e
    finally:
        if tmp_name and os.path.exists(tmp_name):
            os.remove(tmp_name)


def _facts_file(directory: Path, codebase_id: str) -> Path:
    return directory / FACTS_DIR / (codebase_id.replace("/", "__") + ".json")


def save_index(index: CorpusIndex, directory, logger: Optional[logging.Logger] = None) -> None:
    logger = logger or index.logger
    directory = Path(directory)
    directory.mkdir(mode=0o700, parents=True, exist_ok=True)

    codebases = []
    for entry in index.codebases:
        codebases.append({
            "id": entry.id,
            "source": entry.source.name,
            "files": {
                path: {"digest": text_digest(text), "text": text}
                for path, text in entry.codebase.texts.items()
            },
            "skipped": [list(s) for s in entry.skipped],
        })
        atomic_write_json(
            {"version": INDEX_VERSION, "digest": entry.codebase.digest, "facts": entry.edb.to_dict()},
            _facts_file(directory, entry.id),
            logger,
        )
    atomic_write_json(
        {"version": INDEX_VERSION, "manifest": index.manifest.to_dict(), "codebases": codebases},
        directory / INDEX_FILE,
        logger,
    )
    save_cleanliness(index, directory, logger)
    logger.info(f"Saved corpus index to {directory}")


def save_cleanliness(index: CorpusIndex, directory, logger: Optional[logging.Logger] = None) -> None:
    atomic_write_json(
        {"version": INDEX_VERSION, "verdicts": index.cleanliness()},
        Path(directory) / CLEANLINESS_FILE,
        logger or index.logger,
    )


def _read_json(path: Path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _check_version(data, path: Path):
    if not isinstance(data, dict) or data.get("version") != INDEX_VERSION:
        found = data.get("version") if isinstance(data, dict) else None
        raise IndexStorageError(f"{path}: unsupported index version {found!r} (expected {INDEX_VERSION})")


def _load_facts(directory: Path, codebase: Codebase, logger: logging.Logger) -> FactSet:
    path = _facts_file(directory, codebase.id)
    try:
        data = _read_json(path)
        _check_version(data, path)
        if data.get("digest") == codebase.digest:
            return FactSet.from_dict(data["facts"])
        logger.warning(f"Fact cache {path} is stale; re-extracting {codebase.id}")
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        logger.warning(f"Fact cache {path} unreadable ({e}); re-extracting {codebase.id}")
    return codebase_facts(codebase)


def _load_cleanliness(directory: Path, logger: logging.Logger) -> dict:
    path = directory / CLEANLINESS_FILE
    try:
        data = _read_json(path)
    except FileNotFoundError:
        return {}
    except (OSError, json.JSONDecodeError):
        bak_name = f"{path}.{_datetime_now_str()}.bak"
        logger.warning(f"Could not decode {path}. Renaming to {bak_name} and starting empty.")
        try:
            os.replace(path, bak_name)
            os.chmod(bak_name, 0o600)
        except OSError as e:
            logger.error(f"Failed to rename corrupted cache '{path}' -> '{bak_name}': {e}")
        return {}
    _check_version(data, path)
    verdicts = data.get("verdicts", {})
    return {k: v for k, v in verdicts.items() if isinstance(v, bool)}


def load_index(directory, logger: Optional[logging.Logger] = None) -> CorpusIndex:
    """
    Load a saved index. File digests are re-verified; stale fact caches are
    rebuilt. Raises IndexStorageError when index.json is missing, corrupt or
    of another version.
    """
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    directory = Path(directory)
    index_path = directory / INDEX_FILE
    try:
        data = _read_json(index_path)
    except (OSError, json.JSONDecodeError) as e:
        raise IndexStorageError(f"cannot load corpus index {index_path}: {e}") from e
    _check_version(data, index_path)

    try:
        manifest = parse_manifest(data["manifest"], directory, check_paths=False)
        entries = []
        for item in data["codebases"]:
            texts = {}
            for path, record in item["files"].items():
                if text_digest(record["text"]) != record["digest"]:
                    raise IndexStorageError(f"{index_path}: digest mismatch for {item['id']}/{path}")
                texts[path] = record["text"]
            codebase = Codebase(item["id"], texts)
            entries.append(IndexedCodebase(
                id=item["id"],
                source=manifest.source(item["source"]),
                codebase=codebase,
                edb=_load_facts(directory, codebase, logger),
                skipped=tuple(tuple(s) for s in item.get("skipped", [])),
            ))
    except (KeyError, TypeError, ManifestError) as e:
        raise IndexStorageError(f"{index_path} is malformed: {e}") from e

    index = CorpusIndex(manifest, entries, _load_cleanliness(directory, logger), logger)
    logger.info(f"Loaded corpus index from {directory}: {len(index.codebases)} codebases")
    return index
