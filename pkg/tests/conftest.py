"""
Shared test fixtures.

Synthetic CoNLL 2009 corpora are generated from a small seeded vocabulary so
every test sees the same data without any licensed files.
"""

import os
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pytest
from faker import Faker

from app.config.settings import get_settings
from app.models.conll_models import Corpus
from app.models.embedding_models import EmbeddingTable
from app.repositories.conll_repository import parse_conll09

# (forms, {predicate position: (lemma, sense, {argument position: label})})
SentenceLayout = Tuple[Sequence[str], Dict[int, Tuple[str, str, Dict[int, str]]]]

ARGUMENT_LABELS = {"agent": "A0", "theme": "A1", "time": "AM-TMP"}


def conll_row(token_id: int, form: str, lemma: str, fill: bool, sense: Optional[str], apreds: Sequence[str]) -> str:
    cells = [
        str(token_id), form, lemma, lemma, "NN", "NN", "_", "_",
        "0" if token_id == 1 else "1", "0" if token_id == 1 else "1",
        "ROOT" if token_id == 1 else "DEP", "ROOT" if token_id == 1 else "DEP",
        "Y" if fill else "_", sense or "_",
    ]
    return "\t".join(cells + list(apreds))


def render_conll(sentences: Sequence[SentenceLayout]) -> str:
    """CoNLL 2009 text for sentence specs."""
    lines: List[str] = []
    for forms, predicates in sentences:
        positions = sorted(predicates)
        for token_id, form in enumerate(forms, start=1):
            lemma, sense, _ = predicates.get(token_id, (form.lower(), None, None))
            apreds = [predicates[p][2].get(token_id, "_") for p in positions]
            lines.append(conll_row(token_id, form, lemma, token_id in predicates, sense, apreds))
        lines.append("")
    return "".join(line + "\n" for line in lines)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Isolate tests from the caller's environment and the settings cache."""
    for key in list(os.environ):
        if key.startswith("POLYSRL_") and key != "POLYSRL_CONLL09_DIR":
            monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def make_corpus() -> Callable[[Sequence[SentenceLayout], str], Corpus]:
    """Build a parsed corpus from sentence specs."""
    def factory(sentences: Sequence[SentenceLayout], language: str = "spa") -> Corpus:
        return parse_conll09(render_conll(sentences).splitlines(keepends=True), language)
    return factory


@pytest.fixture(scope="session")
def vocabulary() -> Dict[str, str]:
    """Six distinct seeded word forms: two predicates, three argument words, one filler."""
    fake = Faker()
    fake.seed_instance(2009)
    words: List[str] = []
    while len(words) < 6:
        word = fake.word().lower()
        if word.isalpha() and word not in words:
            words.append(word)
    roles = ["verb_a", "verb_b", "agent", "theme", "time", "filler"]
    return dict(zip(roles, words))


@pytest.fixture
def synthetic_sentences(vocabulary) -> Callable[[int, int], List[SentenceLayout]]:
    """
    Sentences whose argument labels depend only on the word form.

    Every sentence has one predicate; agent, theme and time words carry
    A0, A1 and AM-TMP, the filler word is never an argument.
    """
    def factory(n_sentences: int = 20, seed: int = 0) -> List[SentenceLayout]:
        rng = np.random.default_rng(seed)
        sentences: List[SentenceLayout] = []
        for index in range(n_sentences):
            verb_role = "verb_a" if index % 2 == 0 else "verb_b"
            others = ["agent", "theme", "time", "filler"]
            chosen = [others[i] for i in sorted(rng.choice(4, size=int(rng.integers(1, 5)), replace=False))]
            roles = [verb_role] + chosen
            order = rng.permutation(len(roles))
            roles = [roles[i] for i in order]
            forms = [vocabulary[role] for role in roles]
            position = roles.index(verb_role) + 1
            lemma = vocabulary[verb_role]
            args = {
                token_id: ARGUMENT_LABELS[role]
                for token_id, role in enumerate(roles, start=1)
                if role in ARGUMENT_LABELS
            }
            sentences.append((forms, {position: (lemma, f"{lemma}.01", args)}))
        return sentences
    return factory


@pytest.fixture
def make_embeddings() -> Callable[..., EmbeddingTable]:
    """Random (seeded) embedding table over a token list."""
    def factory(tokens: Sequence[str], dim: int = 8, seed: int = 0) -> EmbeddingTable:
        rng = np.random.default_rng(seed)
        return EmbeddingTable([token.lower() for token in tokens], rng.normal(size=(len(tokens), dim)))
    return factory


@pytest.fixture
def conll09_dir() -> Path:
    """Directory with the licensed CoNLL 2009 files; skips the test when unset."""
    value = os.environ.get("POLYSRL_CONLL09_DIR")
    if not value:
        pytest.skip("POLYSRL_CONLL09_DIR is not set")
    return Path(value)
