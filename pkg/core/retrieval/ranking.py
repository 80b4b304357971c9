# core/retrieval/ranking.py

import fnmatch
import math
import re
from collections import Counter
from dataclasses import replace
from typing import Iterable, Sequence

from core.retrieval.conditions import RetrievalConfig
from core.retrieval.key_examples import KeyExample

_SUBWORD = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")
_SEPARATOR = re.compile(r"[^A-Za-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Split on non-alphanumerics, then at camelCase and letter/digit boundaries; lowercase."""
    tokens = []
    for word in _SEPARATOR.split(text):
        tokens.extend(t.lower() for t in _SUBWORD.findall(word))
    return tokens


class BM25:
    """Okapi BM-25 over pre-tokenized documents."""

    def __init__(self, docs: Sequence[list[str]], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.docs = list(docs)
        self.N = len(self.docs)
        self.doc_len = [len(d) for d in self.docs]
        self.avgdl = sum(self.doc_len) / self.N if self.N else 0.0
        self.tf = [Counter(d) for d in self.docs]
        df = Counter(t for d in self.docs for t in set(d))
        self.idf = {t: math.log((self.N - n + 0.5) / (n + 0.5) + 1) for t, n in df.items()}

    def score(self, query: list[str], i: int) -> float:
        if self.avgdl == 0:
            return 0.0
        norm = self.k1 * (1 - self.b + self.b * self.doc_len[i] / self.avgdl)
        total = 0.0
        for term in query:  # duplicates count
            freq = self.tf[i].get(term, 0)
            if freq:
                total += self.idf[term] * freq * (self.k1 + 1) / (freq + norm)
        return total

    def get_scores(self, query: list[str]) -> list[float]:
        return [self.score(query, i) for i in range(self.N)]


def bm25_rank(query_text: str, examples: Iterable[KeyExample]) -> list[KeyExample]:
    """Score each example's context against the alert context; best first, ties by (priority, path, line)."""
    examples = list(examples)
    if not examples:
        return []
    bm25 = BM25([tokenize(ex.context_text) for ex in examples])
    scores = bm25.get_scores(tokenize(query_text))
    scored = [replace(ex, score=s) for ex, s in zip(examples, scores)]
    scored.sort(key=lambda ex: (-ex.score, ex.priority, ex.codebase, ex.snippet.file, ex.snippet.line, ex.predicate))
    return [replace(ex, rank=i + 1) for i, ex in enumerate(scored)]


def in_library(example: KeyExample, globs: Iterable[str]) -> bool:
    paths = (example.snippet.file, f"{example.codebase}/{example.snippet.file}")
    return any(fnmatch.fnmatchcase(p, g) for g in globs for p in paths)


def _match_counts(examples: list[KeyExample]) -> Counter:
    """Corpus-wide matches per predicate; never fewer than the examples at hand."""
    counts = Counter(ex.predicate for ex in examples)
    for ex in examples:
        counts[ex.predicate] = max(counts[ex.predicate], ex.match_count)
    return counts


def prioritize(examples: Iterable[KeyExample], query_text: str, config: RetrievalConfig) -> dict[str, list[KeyExample]]:
    """
    Apply the ranking heuristics in order: drop library code and library
    predicates, drop predicates with too many matches, rank by BM-25, then keep
    the first `max_examples_per_source` of each source. Sources come back in
    (priority, manifest order).
    """
    examples = list(examples)
    kept = [
        ex for ex in examples
        if not ex.library_predicate and not in_library(ex, config.library_globs)
    ]
    counts = _match_counts(examples)
    kept = [ex for ex in kept if counts[ex.predicate] <= config.max_predicate_matches]

    grouped: dict[str, list[KeyExample]] = {}
    for ex in bm25_rank(query_text, kept):
        grouped.setdefault(ex.source, []).append(ex)
    order = sorted(grouped, key=lambda s: (grouped[s][0].priority, grouped[s][0].source_order))
    return {src: grouped[src][:config.max_examples_per_source] for src in order}


def flatten(per_source: dict[str, list[KeyExample]]) -> list[KeyExample]:
    return [ex for examples in per_source.values() for ex in examples]
