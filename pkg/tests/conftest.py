"""Shared fixtures: the bundled corpus analysed once per session."""

from pathlib import Path

import pytest

from sailstate.backend import bundled_corpus_dir, default_backend
from sailstate.classifier import build_access_matrix, classify_all
from sailstate.footprint import instruction_insights
from sailstate.isa_model import derive_explicit_access, discover_states
from sailstate.parser import parse_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def backend():
    return default_backend()


@pytest.fixture(scope="session")
def corpus_paths():
    return sorted(Path(bundled_corpus_dir()).glob("*.sail"))


@pytest.fixture(scope="session")
def model(corpus_paths):
    return parse_corpus(corpus_paths)


@pytest.fixture(scope="session")
def table(model, backend):
    return discover_states(model, backend)


@pytest.fixture(scope="session")
def explicit(model, backend, table):
    return derive_explicit_access(model, backend, table)


@pytest.fixture(scope="session")
def insights(model, backend):
    return instruction_insights(model, backend)


@pytest.fixture(scope="session")
def matrix(insights, explicit, table, backend):
    return build_access_matrix(insights, explicit, table, backend)


@pytest.fixture(scope="session")
def report_ss(matrix):
    return classify_all("Supervisor", "Supervisor", matrix)
