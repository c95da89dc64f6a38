from pathlib import Path

import pytest

from mdot.parser import SourceFile, parse

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def corpus_path(name):
    return CORPUS / name


def load(name):
    return parse(SourceFile.read(corpus_path(name)))


@pytest.fixture(scope="session")
def corpus():
    return [(p.name, parse(SourceFile.read(p))) for p in sorted(CORPUS.glob("*.mdot"))]


# acceptance criteria record their outcome here for the terminal summary
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, text = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}")
