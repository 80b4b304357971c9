# core/corpus/index.py

"""
The clean-code corpus: every codebase of every manifest source, parsed and
fact-extracted once, plus per-rule cleanliness verdicts cached by content digest.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

from core.analyzer import DEFAULT_LOGGER, run_on_facts
from core.corpus.manifest import CorpusManifest, CorpusSource
from core.datalog.facts import FactSet
from core.datalog.program import RuleProgram
from core.lang.codebase import SOURCE_SUFFIX, Codebase, read_source
from core.lang.facts import codebase_facts, extract_facts
from core.lang.source import ParseError, parse_file


@dataclass(frozen=True)
class IndexedCodebase:
    id: str
    source: CorpusSource
    codebase: Codebase
    edb: FactSet
    skipped: tuple = ()  # (path, reason) of files left out because they did not decode or parse

    @property
    def sort_key(self) -> tuple:
        return self.source.priority, self.source.order, self.id


class CorpusIndex:
    """
    Built index over a manifest. Queries are read-only except for the
    cleanliness cache, which is guarded by a lock so concurrent checks are safe.
    """

    def __init__(self, manifest: CorpusManifest, codebases: Iterable[IndexedCodebase],
                 cleanliness: Optional[dict] = None, logger: Optional[logging.Logger] = None):
        self.manifest = manifest
        self.codebases = sorted(codebases, key=lambda c: (c.source.order, c.id))
        self.logger = logger or logging.getLogger(DEFAULT_LOGGER)
        self._by_id = {c.id: c for c in self.codebases}
        self._cleanliness = dict(cleanliness or {})
        self._lock = threading.Lock()

    def get(self, codebase_id: str) -> IndexedCodebase:
        return self._by_id[codebase_id]

    @property
    def file_count(self) -> int:
        return sum(len(c.codebase.texts) for c in self.codebases)

    @property
    def skipped(self) -> list[tuple[str, str, str]]:
        return [(c.id, path, reason) for c in self.codebases for path, reason in c.skipped]

    def cleanliness(self) -> dict[str, bool]:
        with self._lock:
            return dict(self._cleanliness)

    def is_clean(self, program: RuleProgram, entry: IndexedCodebase) -> bool:
        key = f"{program.digest}:{entry.codebase.digest}"
        with self._lock:
            cached = self._cleanliness.get(key)
        if cached is not None:
            self.logger.debug(f"Cleanliness cache hit for {entry.id}")
            return cached
        verdict = not run_on_facts(program, entry.edb, entry.id).alerts
        with self._lock:
            self._cleanliness[key] = verdict
        self.logger.debug(f"Cleanliness of {entry.id} under {program.rule_id}: {verdict}")
        return verdict


def discover_codebases(source: CorpusSource) -> list[tuple[Codebase, list]]:
    """
    Each immediate subdirectory of a source is one codebase ("<source>/<dir>");
    loose top-level files form a codebase named after the source itself.
    Files that are not UTF-8 come back beside their codebase as (path, reason).
    """
    root = Path(source.path)
    found = []
    loose, undecodable = {}, []
    for p in sorted(root.glob(f"*{SOURCE_SUFFIX}")):
        if not p.is_file():
            continue
        try:
            loose[p.name] = read_source(p)
        except UnicodeDecodeError as e:
            undecodable.append((p.name, f"not valid UTF-8: {e.reason}"))
    if loose or undecodable:
        found.append((Codebase(source.name, loose), undecodable))
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        undecodable = []
        codebase = Codebase.load(sub, f"{source.name}/{sub.name}", undecodable)
        if codebase.texts or undecodable:
            found.append((codebase, undecodable))
    return found


def index_codebase(codebase: Codebase, source: CorpusSource, logger: logging.Logger,
                   undecodable: Iterable = ()) -> IndexedCodebase:
    skipped = list(undecodable)
    for path, reason in skipped:
        logger.warning(f"Skipping undecodable corpus file {codebase.id}/{path}: {reason}")
    parsed = []
    for path, text in codebase.texts.items():
        try:
            parsed.append(parse_file(path, text))
        except ParseError as e:
            logger.warning(f"Skipping unparseable corpus file {codebase.id}/{path}: {e.message} (line {e.line})")
            skipped.append((path, f"line {e.line}: {e.message}"))
    kept = codebase.without(p for p, _ in skipped)
    return IndexedCodebase(codebase.id, source, kept, extract_facts(parsed), tuple(skipped))


def build_index(manifest: CorpusManifest, workers: int = 4, logger: Optional[logging.Logger] = None) -> CorpusIndex:
    """Parse and extract every corpus file. Undecodable and unparseable files are skipped with a warning."""
    logger = logger or logging.getLogger(DEFAULT_LOGGER)
    jobs = [(cb, src, bad) for src in manifest.sources for cb, bad in discover_codebases(src)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        entries = list(pool.map(lambda job: index_codebase(job[0], job[1], logger, job[2]), jobs))
    index = CorpusIndex(manifest, entries, logger=logger)
    logger.info(f"Indexed {len(index.codebases)} codebases ({index.file_count} files, {len(index.skipped)} skipped)")
    return index


def clean_codebases(index: CorpusIndex, program: RuleProgram) -> list[IndexedCodebase]:
    """Codebases with no alert under `program`, by (source priority, manifest order)."""
    return sorted((c for c in index.codebases if index.is_clean(program, c)), key=lambda c: c.sort_key)


def literal_rank(index: CorpusIndex, program: RuleProgram, top_k: int = 3, min_len: int = 5) -> list[IndexedCodebase]:
    """
    Rank codebases of `literal` sources by how many of their files contain any
    rule-body string constant of at least `min_len` characters.
    """
    literals = [s for s in program.string_constants() if len(s) >= min_len]
    if not literals or top_k <= 0:
        return []
    scored = []
    for entry in index.codebases:
        if entry.source.kind != "literal":
            continue
        hits = sum(1 for text in entry.codebase.texts.values() if any(lit in text for lit in literals))
        if hits:
            scored.append((-hits, entry.source.order, entry.id, entry))
    scored.sort(key=lambda t: t[:3])
    return [t[3] for t in scored[:top_k]]


def select_corpus(index: CorpusIndex, program: RuleProgram, top_k: int = 3, min_len: int = 5) -> list[IndexedCodebase]:
    """Clean codebases, with literal sources narrowed to the `literal_rank` top-k."""
    ranked = {c.id for c in literal_rank(index, program, top_k, min_len)}
    return [c for c in clean_codebases(index, program) if c.source.kind != "literal" or c.id in ranked]


def normalize_text(text: str) -> str:
    body = "\n".join(line.rstrip() for line in text.splitlines()).rstrip("\n")
    return body + "\n"


def apply_exclusion(index: CorpusIndex, exclusion_texts: Iterable[str]) -> CorpusIndex:
    """Drop corpus files whose normalized content equals any exclusion text."""
    excluded = {normalize_text(t) for t in exclusion_texts}
    if not excluded:
        return index
    entries = []
    for entry in index.codebases:
        drop = [p for p, t in entry.codebase.texts.items() if normalize_text(t) in excluded]
        if not drop:
            entries.append(entry)
            continue
        index.logger.info(f"Excluding {len(drop)} file(s) from {entry.id}: {', '.join(drop)}")
        kept = entry.codebase.without(drop)
        entries.append(replace(entry, codebase=kept, edb=codebase_facts(kept)))
    return CorpusIndex(index.manifest, entries, index.cleanliness(), index.logger)
