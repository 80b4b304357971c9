import json
import logging

import pytest

from core.corpus.index import (
    apply_exclusion, build_index, clean_codebases, literal_rank, normalize_text, select_corpus,
)
from core.corpus.index_storage import (
    CLEANLINESS_FILE, INDEX_FILE, IndexStorageError, load_index, save_cleanliness, save_index,
)
from core.corpus.manifest import ManifestError, load_manifest, parse_manifest

SAFE = (
    'env = new HashMap();\n'
    'env.put("jmx.remote.rmi.server.credential.types", types);\n'
    'server = new RMIConnectorServer(url, env);\n'
)
UNSAFE = 'env = new HashMap();\nserver = new RMIConnectorServer(url, env);\n'
PLAIN = "x = new T();\nx.run();\n"


def write_corpus(root, sources):
    """sources: name -> (kind, priority, {relative path: text})"""
    entries = []
    for name, (kind, priority, files) in sources.items():
        for rel, text in files.items():
            path = root / "corpus" / name / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        (root / "corpus" / name).mkdir(parents=True, exist_ok=True)
        entries.append({"name": name, "kind": kind, "path": f"corpus/{name}", "priority": priority})
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"sources": entries}), encoding="utf-8")
    return load_manifest(manifest)


def test_f1_corpus(f1_index):
    assert [c.id for c in f1_index.codebases] == ["literal/safe"]
    assert f1_index.file_count == 1
    assert f1_index.get("literal/safe").edb.get("methodCall")


def test_loose_files_and_subdirectories(tmp_path, logger):
    manifest = write_corpus(tmp_path, {"pop": ("popular", 0, {"a.ml": PLAIN, "sub/b.ml": PLAIN, "sub/deep/c.ml": PLAIN})})
    index = build_index(manifest, workers=2, logger=logger)
    assert [c.id for c in index.codebases] == ["pop", "pop/sub"]
    assert index.get("pop/sub").codebase.paths == ["b.ml", "deep/c.ml"]


def test_unparseable_files_are_skipped(tmp_path, logger, caplog):
    manifest = write_corpus(tmp_path, {"pop": ("popular", 0, {"p/good.ml": PLAIN, "p/bad.ml": "x = ;\n"})})
    with caplog.at_level(logging.WARNING, logger=logger.name):
        index = build_index(manifest, logger=logger)
    entry = index.get("pop/p")
    assert entry.codebase.paths == ["good.ml"]
    assert [(cid, path) for cid, path, _ in index.skipped] == [("pop/p", "bad.ml")]
    assert "bad.ml" in caplog.text


def test_undecodable_files_are_skipped(tmp_path, logger, caplog):
    manifest = write_corpus(tmp_path, {"pop": ("popular", 0, {"top.ml": PLAIN, "p/good.ml": PLAIN})})
    (tmp_path / "corpus" / "pop" / "p" / "bad.ml").write_bytes(b'x = "\xff";\n')
    (tmp_path / "corpus" / "pop" / "loose.ml").write_bytes(b"\xfe\xfe\n")
    with caplog.at_level(logging.WARNING, logger=logger.name):
        index = build_index(manifest, logger=logger)
    assert index.get("pop").codebase.paths == ["top.ml"]
    assert index.get("pop/p").codebase.paths == ["good.ml"]
    assert sorted((cid, path) for cid, path, _ in index.skipped) == [("pop", "loose.ml"), ("pop/p", "bad.ml")]
    assert "not valid UTF-8" in caplog.text


@pytest.mark.parametrize("sources", [
    [{"name": "a", "kind": "popular", "path": "missing"}],
    [{"name": "a", "kind": "nonsense", "path": "."}],
    [{"name": "a", "kind": "popular", "path": "."}, {"name": "a", "kind": "user", "path": "."}],
    [{"name": "a", "kind": "popular", "path": ".", "priority": "high"}],
    [{"name": "a/b", "kind": "popular", "path": "."}],
    [{"kind": "popular", "path": "."}],
])
def test_manifest_validation(tmp_path, sources):
    with pytest.raises(ManifestError):
        parse_manifest({"sources": sources}, tmp_path)


def test_manifest_file_errors(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "absent.json")
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "broken.json")


def test_manifest_order_and_defaults(tmp_path):
    manifest = parse_manifest({"sources": [
        {"name": "b", "kind": "user", "path": "."},
        {"name": "a", "kind": "popular", "path": ".", "priority": 2},
    ]}, tmp_path)
    assert [(s.name, s.order, s.priority) for s in manifest.sources] == [("b", 0, 0), ("a", 1, 2)]
    with pytest.raises(ManifestError):
        manifest.source("c")


def test_only_clean_codebases_are_kept(tmp_path, f1_program, logger):
    manifest = write_corpus(tmp_path, {
        "user": ("user", 1, {"good/a.ml": SAFE, "bad/a.ml": UNSAFE}),
        "pop": ("popular", 0, {"plain/a.ml": PLAIN}),
    })
    index = build_index(manifest, logger=logger)
    assert [c.id for c in clean_codebases(index, f1_program)] == ["pop/plain", "user/good"]
    verdicts = index.cleanliness()
    assert sorted(verdicts.values()) == [False, True, True]
    assert all(key.startswith(f1_program.digest + ":") for key in verdicts)
    clean_codebases(index, f1_program)
    assert index.cleanliness() == verdicts


def test_literal_rank_counts_files(tmp_path, f1_program, logger):
    manifest = write_corpus(tmp_path, {
        "lit": ("literal", 0, {
            "one/a.ml": SAFE, "one/b.ml": PLAIN,
            "two/a.ml": SAFE, "two/b.ml": 'y = "RMIConnectorServer";\n',
            "none/a.ml": PLAIN,
        }),
        "pop": ("popular", 0, {"p/a.ml": SAFE}),
    })
    index = build_index(manifest, logger=logger)
    assert [c.id for c in literal_rank(index, f1_program, top_k=5)] == ["lit/two", "lit/one"]
    assert [c.id for c in literal_rank(index, f1_program, top_k=1)] == ["lit/two"]
    assert literal_rank(index, f1_program, top_k=5, min_len=100) == []

    selected = [c.id for c in select_corpus(index, f1_program, top_k=1)]
    assert selected == ["lit/two", "pop/p"]


def test_normalize_text():
    assert normalize_text("a;  \nb;\n\n\n") == "a;\nb;\n"
    assert normalize_text("a;") == "a;\n"
    assert normalize_text("a;\r\nb;") == "a;\nb;\n"


def test_exclusion_drops_identical_files(tmp_path, f1_program, logger):
    manifest = write_corpus(tmp_path, {"user": ("user", 0, {"u/same.ml": SAFE, "u/other.ml": PLAIN})})
    index = build_index(manifest, logger=logger)
    clean_codebases(index, f1_program)
    excluded = apply_exclusion(index, [SAFE.replace(";\n", ";   \n") + "\n\n"])
    entry = excluded.get("user/u")
    assert entry.codebase.paths == ["other.ml"]
    assert all(name != "RMIConnectorServer" for _, name in entry.edb.get("constructorName"))
    assert excluded.cleanliness() == index.cleanliness()
    assert apply_exclusion(index, []) is index


def test_index_round_trip(tmp_path, f1_program, logger):
    manifest = write_corpus(tmp_path, {"user": ("user", 0, {"u/a.ml": SAFE, "v/b.ml": UNSAFE})})
    index = build_index(manifest, logger=logger)
    clean_codebases(index, f1_program)
    out = tmp_path / "index"
    save_index(index, out, logger)

    loaded = load_index(out, logger)
    assert [c.id for c in loaded.codebases] == [c.id for c in index.codebases]
    for before, after in zip(index.codebases, loaded.codebases):
        assert before.codebase == after.codebase
        assert before.edb == after.edb
        assert before.source == after.source
    assert loaded.cleanliness() == index.cleanliness()
    assert (out / INDEX_FILE).stat().st_mode & 0o777 == 0o600


def test_corrupt_cleanliness_cache_is_set_aside(tmp_path, logger, caplog):
    manifest = write_corpus(tmp_path, {"pop": ("popular", 0, {"p/a.ml": PLAIN})})
    out = tmp_path / "index"
    save_index(build_index(manifest, logger=logger), out, logger)
    (out / CLEANLINESS_FILE).write_text("{not json", encoding="utf-8")

    with caplog.at_level(logging.WARNING, logger=logger.name):
        loaded = load_index(out, logger)
    assert loaded.cleanliness() == {}
    assert list(out.glob(f"{CLEANLINESS_FILE}.*.bak"))
    assert not (out / CLEANLINESS_FILE).exists()
    save_cleanliness(loaded, out, logger)
    assert (out / CLEANLINESS_FILE).exists()


def test_stale_fact_cache_is_rebuilt(tmp_path, logger, caplog):
    manifest = write_corpus(tmp_path, {"pop": ("popular", 0, {"p/a.ml": PLAIN})})
    index = build_index(manifest, logger=logger)
    out = tmp_path / "index"
    save_index(index, out, logger)
    facts_file = out / "facts" / "pop__p.json"
    data = json.loads(facts_file.read_text(encoding="utf-8"))
    data["digest"] = "0" * 64
    data["facts"] = {}
    facts_file.write_text(json.dumps(data), encoding="utf-8")

    with caplog.at_level(logging.WARNING, logger=logger.name):
        loaded = load_index(out, logger)
    assert "stale" in caplog.text
    assert loaded.get("pop/p").edb == index.get("pop/p").edb


def test_tampered_or_foreign_index_is_rejected(tmp_path, logger):
    manifest = write_corpus(tmp_path, {"pop": ("popular", 0, {"p/a.ml": PLAIN})})
    out = tmp_path / "index"
    save_index(build_index(manifest, logger=logger), out, logger)
    index_file = out / INDEX_FILE
    data = json.loads(index_file.read_text(encoding="utf-8"))

    data["codebases"][0]["files"]["a.ml"]["text"] = "x = 2;\n"
    index_file.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(IndexStorageError):
        load_index(out, logger)

    data["version"] = 99
    index_file.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(IndexStorageError):
        load_index(out, logger)

    with pytest.raises(IndexStorageError):
        load_index(tmp_path / "nowhere", logger)
