"""Seeded synthetic corpus with deterministically cued components.

Argument components are flanked by dedicated marker tokens: the opening
marker takes the B tag and everything through the closing marker is I, so a
sequence model can recover the spans exactly. Useful for smoke tests and
for trying the CLI without a real corpus.
"""

from __future__ import annotations

from .autodiff import Prng
from .corpus import Corpus, Document, LabeledSentence, relative_position
from .embeddings import EmbeddingTable, build_random_table

OPEN_MARKER = "<arg"
CLOSE_MARKER = "arg>"
N_FILLERS = 48

FILLERS = tuple(f"w{i:02d}" for i in range(N_FILLERS))
VOCAB = FILLERS + (OPEN_MARKER, CLOSE_MARKER)  # 50 words


def _make_sentence(rng: Prng, argumentative: bool) -> tuple[tuple[str, ...], tuple[str, ...]]:
    n_fill = int(rng.integers(3, 8))
    fillers = [FILLERS[int(i)] for i in rng.integers(0, N_FILLERS, size=n_fill)]
    if not argumentative:
        return tuple(fillers), tuple("O" for _ in fillers)
    core_len = int(rng.integers(1, 4))
    core = [FILLERS[int(i)] for i in rng.integers(0, N_FILLERS, size=core_len)]
    pos = int(rng.integers(0, n_fill + 1))
    tokens = fillers[:pos] + [OPEN_MARKER, *core, CLOSE_MARKER] + fillers[pos:]
    tags = ["O"] * pos + ["B"] + ["I"] * (core_len + 1) + ["O"] * (n_fill - pos)
    return tuple(tokens), tuple(tags)


def generate_corpus(
    n_sentences: int,
    rng: Prng,
    sentences_per_doc: int = 5,
    p_argumentative: float = 0.5,
    doc_prefix: str = "synth",
) -> Corpus:
    documents = []
    produced = 0
    doc_index = 0
    while produced < n_sentences:
        doc_len = min(sentences_per_doc, n_sentences - produced)
        sentences = []
        for i in range(doc_len):
            argumentative = bool(rng.random(()) < p_argumentative)
            tokens, tags = _make_sentence(rng, argumentative)
            sentences.append(
                LabeledSentence(tokens, tags, rel_pos=relative_position(i, doc_len))
            )
        documents.append(Document(id=f"{doc_prefix}{doc_index}", sentences=tuple(sentences)))
        doc_index += 1
        produced += doc_len
    return Corpus(documents=tuple(documents))


def generate_table(rng: Prng, dim: int = 16) -> EmbeddingTable:
    return build_random_table(list(VOCAB), dim, rng)
