import json
import logging
import shutil

import pytest

from conftest import F1, NPE
from main import main
from tools.llm_backends import MockBackend

RULES = str(F1 / "rules" / "rmi.dl")
MOCK = str(F1 / "mock.json")


@pytest.fixture(autouse=True)
def cli_env(in_tmp_cwd, monkeypatch):
    for key in ("WORKERS", "BACKEND", "MOCK_CONFIG", "SESSION_LOG", "LOG_DIRECTORY", "LIBRARY_GLOBS"):
        monkeypatch.delenv(key, raising=False)
    yield in_tmp_cwd
    logger = logging.getLogger("predifix")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


@pytest.fixture
def target(cli_env):
    path = cli_env / "target"
    shutil.copytree(F1 / "target", path)
    return path


@pytest.fixture
def index_dir(cli_env):
    out = cli_env / "idx"
    assert main(["index", "--manifest", str(F1 / "manifest.json"), "--out", str(out)]) == 0
    return out


def _json(out: str):
    return json.loads(out[min(i for i in (out.find("["), out.find("{")) if i >= 0):])


def test_analyze_json(target, capsys):
    assert main(["analyze", "--rules", RULES, "--target", str(target), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out) == [
        {"alert_id": "hasAlert@main.ml:3", "rule_id": "rmi", "locations": ["main.ml:3"]},
    ]


def test_analyze_clean_target(cli_env, capsys):
    clean = cli_env / "clean"
    clean.mkdir()
    (clean / "a.ml").write_text("x = 1;\n", encoding="utf-8")
    assert main(["analyze", "--rules", RULES, "--target", str(clean)]) == 0
    assert "No alerts" in capsys.readouterr().out


def test_usage_errors(target, capsys):
    assert main([]) == 2
    assert main(["analyze", "--rules", "missing.dl", "--target", str(target)]) == 2
    assert main(["analyze", "--rules", RULES, "--target", "nowhere"]) == 2
    assert main(["retrieve", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3"]) == 2
    assert main(["index", "--manifest", "absent.json", "--out", "idx"]) == 2
    assert "Error" in capsys.readouterr().err


def test_invalid_rules_are_usage_errors(cli_env, target):
    bad = cli_env / "bad.dl"
    bad.write_text(".input q(x: sym)\n.alert p(x: sym)\np(X) :- !q(X).\n", encoding="utf-8")
    assert main(["analyze", "--rules", str(bad), "--target", str(target)]) == 2


def test_bad_configuration_is_a_usage_error(cli_env, target):
    config = cli_env / "cfg.json"
    config.write_text('{"workers": 0}', encoding="utf-8")
    assert main(["analyze", "--rules", RULES, "--target", str(target), "--config", str(config)]) == 2


def test_unparseable_target_is_an_analysis_failure(cli_env):
    broken = cli_env / "broken"
    broken.mkdir()
    (broken / "a.ml").write_text("x = ;\n", encoding="utf-8")
    assert main(["analyze", "--rules", RULES, "--target", str(broken)]) == 3


def test_verbose_dumps_the_effective_configuration(target, capsys):
    assert main(["analyze", "--rules", RULES, "--target", str(target), "--verbose"]) == 0
    assert '"EXAMPLE_CONTEXT": 3' in capsys.readouterr().err


def test_retrieve(target, index_dir, capsys):
    capsys.readouterr()
    args = ["retrieve", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3",
            "--index", str(index_dir)]
    assert main(args) == 0
    records = json.loads(capsys.readouterr().out)
    assert [(r["predicate"], r["codebase"], r["file"], r["line"]) for r in records] == [
        ("putsCredentialTypesKey", "literal/safe", "jmx.ml", 2),
    ]
    assert (index_dir / "cleanliness.json").exists()

    assert main(args + ["--oracle"]) == 0
    assert json.loads(capsys.readouterr().out) == records
    assert main(args + ["--exclude", str(F1 / "corpus" / "literal" / "safe" / "jmx.ml")]) == 0
    assert json.loads(capsys.readouterr().out) == []


def test_retrieve_alert_errors(target, index_dir):
    base = ["retrieve", "--rules", RULES, "--target", str(target), "--index", str(index_dir)]
    assert main(base + ["--alert", "hasAlert@main.ml:2"]) == 1
    assert main(base + ["--alert", "main.ml:3"]) == 2


def test_fix_dry_run_leaves_target_alone(target, index_dir, capsys):
    before = (target / "main.ml").read_text(encoding="utf-8")
    capsys.readouterr()
    code = main(["fix", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3",
                 "--index", str(index_dir), "--backend", "mock", "--mock-config", MOCK, "--dry-run"])
    assert code == 0
    summary = _json(capsys.readouterr().out)
    assert summary["status"] == "fixed"
    assert summary["attempts"] == 2
    assert summary["changed_files"] == ["main.ml"]
    assert summary["dry_run"] is True
    assert (target / "main.ml").read_text(encoding="utf-8") == before


def test_fix_writes_patch_and_session_log(cli_env, target, index_dir, capsys):
    log = cli_env / "session.json"
    code = main(["fix", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3",
                 "--index", str(index_dir), "--mock-config", MOCK, "--session-log", str(log)])
    assert code == 0
    assert "credential.types" in (target / "main.ml").read_text(encoding="utf-8")
    session = json.loads(log.read_text(encoding="utf-8"))
    assert session["status"] == "fixed"
    assert session["attempt_count"] == 2
    assert main(["analyze", "--rules", RULES, "--target", str(target), "--format", "json"]) == 0
    assert _json(capsys.readouterr().out.splitlines()[-1]) == []


def test_fix_without_examples_is_exhausted(target):
    code = main(["fix", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3",
                 "--mock-config", MOCK])
    assert code == 1


def test_fix_without_mock_config_is_a_usage_error(target):
    code = main(["fix", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3"])
    assert code == 2


def test_null_rule_end_to_end(cli_env, capsys):
    target = cli_env / "npe"
    shutil.copytree(NPE / "target", target)
    assert main(["index", "--manifest", str(NPE / "manifest.json"), "--out", str(cli_env / "npe_idx")]) == 0
    capsys.readouterr()
    assert main(["retrieve", "--rules", str(NPE / "npe.dl"), "--target", str(target),
                 "--alert", "hasAlert@target.ml:6", "--index", str(cli_env / "npe_idx")]) == 0
    (record,) = json.loads(capsys.readouterr().out)
    assert (record["codebase"], record["line"]) == ("popular/guarded", 3)


def test_fix_keeps_crlf_line_endings(target, index_dir):
    crlf = (target / "main.ml").read_bytes().replace(b"\n", b"\r\n")
    (target / "main.ml").write_bytes(crlf)
    code = main(["fix", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3",
                 "--index", str(index_dir), "--mock-config", MOCK])
    assert code == 0
    assert (target / "main.ml").read_bytes() == (
        b'env = new HashMap();\r\n'
        b'env.put("socketFactory", f);\r\n'
        b'env.put("jmx.remote.rmi.server.credential.types", types);\r\n'
        b'server = new RMIConnectorServer(url, env);\r\n'
    )


def test_undecodable_target_is_an_analysis_failure(cli_env, capsys):
    broken = cli_env / "broken"
    broken.mkdir()
    (broken / "a.ml").write_bytes(b'x = "\xff";\n')
    assert main(["analyze", "--rules", RULES, "--target", str(broken)]) == 3
    assert "not valid UTF-8" in capsys.readouterr().err


def test_fix_closes_the_backend(target, monkeypatch):
    closed = []
    backend = MockBackend.from_file(F1 / "mock.json")
    monkeypatch.setattr(backend, "close", lambda: closed.append(True), raising=False)
    monkeypatch.setattr("core.commands.fix_handler.create_backend", lambda config, name, logger: backend)
    code = main(["fix", "--rules", RULES, "--target", str(target), "--alert", "hasAlert@main.ml:3",
                 "--mock-config", MOCK])
    assert code == 1
    assert closed == [True]
