import logging
from pathlib import Path

import pytest

from core.analyzer import run_analysis
from core.corpus.index import build_index
from core.corpus.manifest import load_manifest
from core.datalog.program import load_program
from core.lang.codebase import Codebase

FIXTURES = Path(__file__).parent / "fixtures"
F1 = FIXTURES / "f1"
NPE = FIXTURES / "npe"


@pytest.fixture
def logger():
    return logging.getLogger("predifix.tests")


@pytest.fixture
def f1_program():
    return load_program(F1 / "rules" / "rmi.dl")


@pytest.fixture
def f1_target():
    return Codebase.load(F1 / "target", "target")


@pytest.fixture
def f1_run(f1_program, f1_target):
    return run_analysis(f1_program, f1_target)


@pytest.fixture
def f1_index(logger):
    return build_index(load_manifest(F1 / "manifest.json"), workers=2, logger=logger)


@pytest.fixture
def npe_program():
    return load_program(NPE / "npe.dl")


@pytest.fixture
def npe_target():
    return Codebase.load(NPE / "target", "target")


@pytest.fixture
def npe_index(logger):
    return build_index(load_manifest(NPE / "manifest.json"), workers=2, logger=logger)


@pytest.fixture
def in_tmp_cwd(tmp_path, monkeypatch):
    """Run with the working directory in tmp_path, so log files land there."""
    monkeypatch.chdir(tmp_path)
    return tmp_path
