import pytest

from argbound.autodiff import Prng
from argbound.corpus import LabeledSentence
from argbound.embeddings import build_random_table


@pytest.fixture
def rng():
    return Prng(12345)


@pytest.fixture
def small_table():
    """12-word, 8-dim random table used by the model-level tests."""
    return build_random_table([f"t{i}" for i in range(12)], 8, Prng(99))


@pytest.fixture
def sample_sentence():
    return LabeledSentence(
        ("t1", "t2", "oov", "t3", "t4", "t1"),
        ("B", "I", "I", "O", "B", "I"),
        rel_pos=0.25,
    )
