import pytest

from fbdforge import Vocabulary, load_corpus

C0_TEXT = "\n".join(
    [
        '{"id": "P1", "symbols": ["AND", "OR", "TON"]}',
        '{"id": "P2", "symbols": ["AND", "OR", "MOVE"]}',
        '{"id": "P3", "symbols": ["AND", "NOT", "OR"]}',
    ]
)


@pytest.fixture
def c0():
    return load_corpus(C0_TEXT)


@pytest.fixture
def abc_vocab():
    return Vocabulary.of("A", "B", "C")
