from pathlib import Path

import pytest

from kgebow.dataio import parse_triples

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def tiny_store():
    return parse_triples(FIXTURES / "tinykb" / "train.txt")


@pytest.fixture()
def rank_store():
    return parse_triples(FIXTURES / "rankkb" / "all.txt")
