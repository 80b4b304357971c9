import math
import random
from pathlib import Path

import pytest

from core.analyzer import run_analysis, run_on_facts
from core.corpus.index import CorpusIndex, clean_codebases, index_codebase
from core.corpus.manifest import CorpusManifest, CorpusSource
from core.errors import ConfigError
from core.lang.codebase import Codebase
from core.lang.source import Location
from core.retrieval.conditions import (
    RetrievalConfig, check_cond1, check_cond2, check_cond3, get_matches, get_predicates,
)
from core.retrieval.key_examples import (
    KeyExample, find_bridging_predicates, identify_key_examples, oracle_key_examples,
)
from core.retrieval.ranking import BM25, bm25_rank, flatten, in_library, prioritize, tokenize

CONFIG = RetrievalConfig(workers=2)


def test_retrieval_config_validates():
    with pytest.raises(ConfigError):
        RetrievalConfig(example_context=0)
    with pytest.raises(ConfigError):
        RetrievalConfig(workers=True)
    assert RetrievalConfig(library_globs=["lib/*"]).library_globs == ("lib/*",)


def test_conditions_on_rmi(f1_program, f1_run, f1_index):
    (alert,) = f1_run.alerts
    preds = get_predicates(f1_program)
    assert "hasAlert" not in preds
    assert preds[-4:] == ["mapPut", "putsCredentialTypesKey", "safeEnv", "serverCreate"]

    assert check_cond1(f1_program, "mapPut")
    assert not check_cond1(f1_program, "safeEnv")
    assert not check_cond1(f1_program, "constructorName")

    assert check_cond2(f1_program, "putsCredentialTypesKey", f1_run, alert)
    assert not check_cond2(f1_program, "varDef", f1_run, alert)
    unsafe = check_cond2(f1_program, "mapPut", f1_run, alert)
    assert not unsafe and unsafe.outcome.skip is not None

    entry = f1_index.get("literal/safe")
    full = run_on_facts(f1_program, entry.edb, entry.id).full_facts
    assert get_matches(f1_program, full, "putsCredentialTypesKey") == [Location("jmx.ml", 2)]
    negated = check_cond2(f1_program, "putsCredentialTypesKey", f1_run, alert).outcome.program
    assert check_cond3(negated, entry.edb, Location("jmx.ml", 2), CONFIG)
    assert not check_cond3(negated, entry.edb, Location("other.ml", 2), RetrievalConfig(same_file_cond3=True))


def test_rmi_key_example(f1_program, f1_target, f1_run, f1_index, logger):
    (alert,) = f1_run.alerts
    bridges = find_bridging_predicates(f1_program, f1_run, alert, logger)
    assert [b.name for b in bridges] == ["putsCredentialTypesKey"]

    examples = identify_key_examples(
        f1_program, f1_run, alert, clean_codebases(f1_index, f1_program), CONFIG, logger
    )
    assert [(e.predicate, e.codebase, str(e.snippet)) for e in examples] == [
        ("putsCredentialTypesKey", "literal/safe", "jmx.ml:2"),
    ]
    (example,) = examples
    assert example.context_start == 1
    assert example.context_text.splitlines()[1] == 'env.put("jmx.remote.rmi.server.credential.types", types);'
    assert example.source_kind == "literal"
    assert oracle_key_examples(f1_program, f1_target, alert, f1_index.codebases, CONFIG) == examples


def test_null_check_key_example(npe_program, npe_target, npe_index, logger):
    run = run_analysis(npe_program, npe_target)
    (alert,) = run.alerts
    examples = identify_key_examples(
        npe_program, run, alert, clean_codebases(npe_index, npe_program), CONFIG, logger
    )
    assert [(e.predicate, e.codebase, str(e.snippet)) for e in examples] == [
        ("methodCall", "popular/guarded", "main.ml:3"),
    ]
    assert oracle_key_examples(npe_program, npe_target, alert, npe_index.codebases, CONFIG) == examples


def test_no_examples_without_clean_codebases(f1_program, f1_run, logger):
    (alert,) = f1_run.alerts
    assert identify_key_examples(f1_program, f1_run, alert, [], CONFIG, logger) == []


RMI_LINES = [
    "env = new HashMap();",
    'env.put("socketFactory", f);',
    'env.put("jmx.remote.rmi.server.credential.types", t);',
    "server = new RMIConnectorServer(url, env);",
    "other = new HashMap();",
    'other.put("jmx.remote.rmi.server.credential.types", t);',
    "s2 = new RMIConnectorServer(url, other);",
]
NULL_LINES = [
    "x = null;",
    "x = new T();",
    "assert x != null;",
    "x.run();",
    "y = null;",
    "y = new T();",
    "y.run();",
]


def _random_corpus(rng: random.Random, pool: list[str], logger) -> list:
    source = CorpusSource("rand", "popular", Path("."), 0, 0)
    entries = []
    for n in range(rng.randint(1, 3)):
        files = {}
        for f in range(rng.randint(1, 2)):
            files[f"f{f}.ml"] = "".join(rng.choice(pool) + "\n" for _ in range(rng.randint(1, 5)))
        entries.append(index_codebase(Codebase(f"rand/c{n}", files), source, logger))
    return entries


@pytest.mark.parametrize("seed", range(24))
def test_fast_path_matches_brute_force(seed, f1_program, f1_target, npe_program, npe_target, logger):
    rng = random.Random(seed)
    program, target, pool = (
        (f1_program, f1_target, RMI_LINES) if seed % 2 else (npe_program, npe_target, NULL_LINES)
    )
    config = RetrievalConfig(same_file_cond3=rng.random() < 0.5, workers=2)
    run = run_analysis(program, target)
    (alert,) = run.alerts
    entries = _random_corpus(rng, pool, logger)
    index = CorpusIndex(CorpusManifest((entries[0].source,)), entries, logger=logger)

    fast = identify_key_examples(program, run, alert, clean_codebases(index, program), config, logger)
    assert fast == oracle_key_examples(program, target, alert, index.codebases, config)


def test_tokenize_splits_identifiers():
    assert tokenize("HTTPServerFactory.createRMIServer(url2)") == [
        "http", "server", "factory", "create", "rmi", "server", "url", "2",
    ]
    assert tokenize('env.put("jmx.remote", x);') == ["env", "put", "jmx", "remote", "x"]
    assert tokenize("  ;; ") == []


def test_bm25_matches_the_formula():
    docs = [["a", "b", "a"], ["b", "c"], ["c", "c", "c", "d"]]
    query = ["a", "c", "c"]
    bm25 = BM25(docs)
    n_docs, avgdl = 3, 9 / 3
    for i, doc in enumerate(docs):
        expected = 0.0
        for term in query:
            n = sum(1 for d in docs if term in d)
            idf = math.log((n_docs - n + 0.5) / (n + 0.5) + 1)
            tf = doc.count(term)
            expected += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len(doc) / avgdl))
        assert bm25.score(query, i) == pytest.approx(expected, abs=1e-9)
    assert BM25([[], []]).get_scores(["a"]) == [0.0, 0.0]


def _ex(pred="p", codebase="pop/a", file="a.ml", line=1, source="pop", priority=0, order=0,
        context="x = 1;", library=False, matches=0):
    return KeyExample(
        predicate=pred, codebase=codebase, snippet=Location(file, line), context_text=context,
        source=source, source_kind="popular", priority=priority, source_order=order,
        library_predicate=library, match_count=matches,
    )


def test_bm25_rank_orders_by_score_then_position():
    examples = [
        _ex(line=3, context="y.run();"),
        _ex(line=2, context="x.run();"),
        _ex(line=1, context="assert x != null;\nx.run();"),
    ]
    ranked = bm25_rank("x = null;\nx.run();", examples)
    assert [e.snippet.line for e in ranked][0] == 1
    assert [e.rank for e in ranked] == [1, 2, 3]
    assert ranked[0].score >= ranked[1].score >= ranked[2].score
    ties = bm25_rank("zzz", [_ex(line=5), _ex(line=2), _ex(codebase="pop/0", line=9)])
    assert [(e.codebase, e.snippet.line) for e in ties] == [("pop/0", 9), ("pop/a", 2), ("pop/a", 5)]


def test_library_globs_match_file_or_codebase_path():
    example = _ex(codebase="pop/guarded", file="lib/util.ml")
    assert in_library(example, ["lib/*"])
    assert in_library(example, ["pop/guarded/*"])
    assert not in_library(example, ["LIB/*"])
    assert not in_library(example, [])


def test_prioritize_drops_frequent_predicates():
    common = [_ex(pred="common", line=i) for i in range(1, 26)]
    rare = [_ex(pred="rare", line=100)]
    per_source = prioritize(common + rare, "x", RetrievalConfig(max_predicate_matches=20))
    assert [e.predicate for e in flatten(per_source)] == ["rare"]

    busy = [_ex(pred="busy", line=i, matches=25) for i in range(1, 4)]
    per_source = prioritize(busy + rare, "x", RetrievalConfig(max_predicate_matches=20))
    assert [e.predicate for e in flatten(per_source)] == ["rare"]


def test_match_counts_cover_the_whole_clean_corpus(f1_program, f1_target, f1_run, f1_index, logger):
    (alert,) = f1_run.alerts
    puts = 'env.put("jmx.remote.rmi.server.credential.types", t);\n' * 21
    busy = index_codebase(Codebase("pop/busy", {"a.ml": puts}), CorpusSource("pop", "popular", Path("."), 1, 1), logger)
    entries = clean_codebases(f1_index, f1_program) + [busy]

    examples = identify_key_examples(f1_program, f1_run, alert, entries, CONFIG, logger)
    assert [(e.codebase, e.match_count) for e in examples] == [("literal/safe", 22)]
    assert oracle_key_examples(f1_program, f1_target, alert, entries, CONFIG) == examples
    assert prioritize(examples, "x", RetrievalConfig(max_predicate_matches=20)) == {}
    kept = flatten(prioritize(examples, "x", RetrievalConfig(max_predicate_matches=22)))
    assert [e.codebase for e in kept] == ["literal/safe"]


def test_match_counts_include_library_examples():
    lib = [_ex(pred="p", file="lib/a.ml", line=i) for i in range(1, 7)]
    app = [_ex(pred="p", line=i) for i in range(1, 16)]
    config = RetrievalConfig(max_predicate_matches=20, library_globs=("lib/*",))
    assert prioritize(lib + app, "x", config) == {}
    config = RetrievalConfig(max_predicate_matches=21, library_globs=("lib/*",))
    assert all(e.snippet.file == "a.ml" for e in flatten(prioritize(lib + app, "x", config)))


def test_prioritize_drops_library_predicates():
    per_source = prioritize([_ex(pred="helper", library=True), _ex(pred="p")], "x", CONFIG)
    assert [e.predicate for e in flatten(per_source)] == ["p"]


def test_prioritize_keeps_top_examples_per_source():
    user = [_ex(source="user", codebase="user/a", priority=0, order=1, line=i) for i in range(1, 7)]
    pop = [_ex(source="pop", codebase="pop/a", priority=1, order=0, line=i) for i in range(1, 3)]
    per_source = prioritize(pop + user, "x = 1;", RetrievalConfig(max_examples_per_source=4))
    assert list(per_source) == ["user", "pop"]
    assert [e.snippet.line for e in per_source["user"]] == [1, 2, 3, 4]
    assert len(per_source["pop"]) == 2
    assert [e.rank for e in flatten(per_source)][:4] == [1, 2, 3, 4]
