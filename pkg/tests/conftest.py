import random
from pathlib import Path

import pytest

from refinelab.corpus import Corpus, Document, LanguagePair, Segment

FIXTURES = Path(__file__).parent / "fixtures"
FIXTURE_CORPUS = FIXTURES / "fixture_corpus.jsonl"


@pytest.fixture
def fixture_corpus_path() -> Path:
    return FIXTURE_CORPUS


def make_doc(
    texts: list[str],
    doc_id: str = "doc0",
    pair: LanguagePair | None = None,
    lang: str = "",
) -> Document:
    pair = pair or LanguagePair("en", "de")
    segments = tuple(Segment(doc_id, i, t) for i, t in enumerate(texts))
    return Document(doc_id, segments, pair, lang)


def make_corpus(docs: list[Document]) -> Corpus:
    return Corpus(tuple(docs))


def random_doc(rng: random.Random, doc_id: str = "doc0") -> Document:
    """Synthetic document with bounded segment sizes (none above the
    paragraph cap, so greedy bounds are unconditional)."""
    n_segments = rng.randint(1, 40)
    texts = []
    for _ in range(n_segments):
        n_words = rng.randint(1, 120)
        texts.append(" ".join(f"w{rng.randint(0, 50)}" for _ in range(n_words)))
    return make_doc(texts, doc_id)
