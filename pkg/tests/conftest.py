import os

import numpy as np
import pytest

from embedding_forge.corpus import prepare_corpus
from embedding_forge.model_io import ModelFile

# small structured vocabulary: each topic has its own pool of words
TOPICS = {
    "royal": ["king", "queen", "prince", "princess", "throne", "crown"],
    "animal": ["cat", "dog", "horse", "cow", "sheep", "goat"],
    "city": ["paris", "london", "rome", "berlin", "madrid", "vienna"],
    "verb": ["runs", "walks", "jumps", "swims", "flies", "sings"],
}
FILLER = ["the", "a", "of", "and", "in", "to"]


def make_lines(n_sentences: int, seed: int = 0, sentence_length: int = 10):
    """Sentences that draw from one topic each, with a little filler."""
    rng = np.random.default_rng(seed)
    topics = list(TOPICS)
    lines = []
    for _ in range(n_sentences):
        words = TOPICS[topics[rng.integers(len(topics))]]
        sentence = [
            FILLER[rng.integers(len(FILLER))] if rng.random() < 0.3 else words[rng.integers(len(words))]
            for _ in range(sentence_length)
        ]
        lines.append(" ".join(sentence))
    return lines


@pytest.fixture(autouse=True)
def isolated_audit_log(tmp_path, monkeypatch):
    monkeypatch.setenv("EMBEDDING_FORGE_AUDIT_LOG", str(tmp_path / "audit.log"))
    monkeypatch.setenv("EMBEDDING_FORGE_DATA_DIR", str(tmp_path / "data"))


@pytest.fixture
def corpus_lines():
    return make_lines(400)


@pytest.fixture
def corpus_file(tmp_path, corpus_lines):
    path = tmp_path / "corpus.txt"
    path.write_text(" ".join(corpus_lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def artifacts(corpus_lines):
    return prepare_corpus(corpus_lines, min_keep_count=1)


@pytest.fixture
def questions_file(tmp_path):
    path = tmp_path / "questions.txt"
    path.write_text(
        ": capital-common-countries\n"
        "paris france rome italy\n"
        "Paris France London England\n"
        ": gram3-comparative\n"
        "good better bad worse\n"
        "big bigger small smaller\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def toy_model():
    """
    Vectors where king - man + woman lands exactly on queen.
    """
    words = ["man", "king", "woman", "queen", "apple", "pear"]
    vectors = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.1, 0.0, 0.0, 1.0],
    ], dtype=np.float32)
    return ModelFile(words, vectors)


def data_path(variable: str):
    value = os.getenv(variable)
    return value if value and os.path.exists(value) else None
