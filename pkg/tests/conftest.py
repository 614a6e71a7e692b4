import os

import numpy as np
import pytest

from instrec import build_trie, build_vocabulary, tokenize_library

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

#: The three-instruction fixture used across the trie and decode tests.
FIXTURE_SURFACES = ["save phone number", "save address", "navigate to station"]


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def fixture_vocab():
    return build_vocabulary(FIXTURE_SURFACES)


@pytest.fixture
def fixture_library(fixture_vocab):
    return tokenize_library(
        [(f"i{n}", s) for n, s in enumerate(FIXTURE_SURFACES)], fixture_vocab
    )


@pytest.fixture
def fixture_trie(fixture_library, fixture_vocab):
    return build_trie(fixture_library, fixture_vocab)


def seeded_scorer(seed, vocab_size, low=-5.0, high=5.0):
    """Pure pseudo-random scorer: logits depend only on (seed, prefix)."""

    def scorer(prefix):
        state = np.random.RandomState(hash((seed, tuple(prefix))) % (2**32))
        return state.uniform(low, high, vocab_size)

    return scorer


def path_scorer(token_path, vocab_size):
    """One-hot scorer that walks exactly ``token_path`` then stalls at zero."""
    path = tuple(token_path)

    def scorer(prefix):
        logits = np.zeros(vocab_size)
        if len(prefix) < len(path) and tuple(prefix) == path[: len(prefix)]:
            logits[path[len(prefix)]] = 1.0
        return logits

    return scorer


def random_word_pool(count=30):
    return [f"word{i:02d}" for i in range(count)]


def random_instruction_library(rng, count, pool=None, max_len=4):
    """Distinct random surfaces drawn from a small word pool."""
    pool = pool or random_word_pool()
    seen = set()
    entries = []
    while len(entries) < count:
        length = rng.randint(1, max_len + 1)
        words = tuple(pool[i] for i in rng.choice(len(pool), size=length, replace=False))
        if words in seen:
            continue
        seen.add(words)
        entries.append((f"instr-{len(entries):03d}", " ".join(words)))
    return entries
