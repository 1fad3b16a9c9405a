"""Word-embedding tables: text-format loading, OOV fallback, sentence lookup.

Pretrained rows are frozen; one shared UNK row (appended at the end of the
table) is the only trainable embedding parameter.
"""

from __future__ import annotations

import logging

import numpy as np

from .autodiff import Parameter, Prng, Tensor, accumulate
from .corpus import LabeledSentence
from .errors import ParseError

logger = logging.getLogger(__name__)

UNK_STD = 0.1


class EmbeddingTable:
    """Word -> row lookup over a (V, d) matrix whose last row is UNK.

    ``unk`` is the trainable UNK parameter; ``matrix`` keeps only the frozen
    initial values and is never updated by training.
    """

    def __init__(self, words: list[str], matrix: np.ndarray, duplicates: int = 0):
        if matrix.ndim != 2 or matrix.shape[0] != len(words) + 1:
            raise ValueError(
                f"matrix shape {matrix.shape} does not fit {len(words)} words plus UNK"
            )
        self.words = list(words)
        self.dim = matrix.shape[1]
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.vocabulary = {w: i for i, w in enumerate(self.words)}
        if len(self.vocabulary) != len(self.words):
            raise ValueError("duplicate words in embedding table")
        self.unk_index = len(self.words)
        self.unk = Parameter(self.matrix[self.unk_index].copy(), name="embedding.unk")
        self.duplicates = duplicates

    def index_of(self, word: str) -> int:
        """Exact match, then lowercased match, then UNK."""
        idx = self.vocabulary.get(word)
        if idx is not None:
            return idx
        idx = self.vocabulary.get(word.lower())
        if idx is not None:
            return idx
        return self.unk_index

    def row(self, word: str) -> np.ndarray:
        i = self.index_of(word)
        return self.unk.data if i == self.unk_index else self.matrix[i]


def load_embedding_text(path: str, expected_dim: int, rng: Prng) -> EmbeddingTable:
    """Load a space-separated text embedding file.

    An optional first line ``V d`` (two integers) is treated as a header.
    A row with the wrong vector length raises ParseError with its line
    number; duplicate words keep the first row and are counted.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            if lineno == 1 and len(parts) == 2 and all(_is_int(p) for p in parts):
                header_dim = int(parts[1])
                if header_dim != expected_dim:
                    raise ParseError(
                        f"header dimension {header_dim} != expected {expected_dim}", line=lineno
                    )
                continue
            word, vec = parts[0], parts[1:]
            if len(vec) != expected_dim:
                raise ParseError(
                    f"word {word!r} has {len(vec)} values, expected {expected_dim}", line=lineno
                )
            try:
                values = np.array([float(v) for v in vec], dtype=np.float64)
            except ValueError as e:
                raise ParseError(f"non-numeric value for word {word!r}: {e}", line=lineno) from e
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(values)
    if duplicates:
        logger.warning("embedding file %s: %d duplicate words ignored", path, duplicates)
    unk_row = rng.normal((expected_dim,), std=UNK_STD)
    matrix = np.vstack(rows + [unk_row]) if rows else unk_row.reshape(1, -1)
    return EmbeddingTable(words, matrix, duplicates=duplicates)


def build_random_table(words: list[str], dim: int, rng: Prng) -> EmbeddingTable:
    """Random-normal table for experiments without pretrained vectors."""
    matrix = rng.normal((len(words) + 1, dim))
    matrix[-1] = rng.normal((dim,), std=UNK_STD)
    return EmbeddingTable(list(words), matrix)


def _is_int(s: str) -> bool:
    try:
        int(s)
        return True
    except ValueError:
        return False


def embed_sentence(sentence: LabeledSentence, table: EmbeddingTable) -> Tensor:
    """(T, d) embedding matrix for a sentence as a graph node.

    Rows for in-vocabulary tokens are constants; rows at UNK positions read
    the trainable UNK parameter, and gradients flow only there.
    """
    indices = [table.index_of(tok) for tok in sentence.tokens]
    out = np.empty((len(indices), table.dim), dtype=np.float64)
    unk_positions = []
    for t, i in enumerate(indices):
        if i == table.unk_index:
            out[t] = table.unk.data
            unk_positions.append(t)
        else:
            out[t] = table.matrix[i]
    unk = table.unk

    def backward(g, grads):
        if unk_positions:
            accumulate(grads, unk, g[unk_positions].sum(axis=0))

    return Tensor(out, _parents=(unk,), _backward=backward)
