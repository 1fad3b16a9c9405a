"""IOB-labeled sentences grouped into documents, plus ingestion utilities.

File format (UTF-8): an optional document header ``# newdoc id=<string>``,
token lines ``<token>\\t<tag>`` with tag in {B, I, O}, a blank line ending
each sentence. Other ``#`` lines inside a sentence are ignored. Input is
pre-tokenized; this module never splits raw prose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .autodiff import Prng
from .errors import ConfigError, ParseError

TAGS = ("B", "I", "O")
TAG_SET = frozenset(TAGS)

_NEWDOC_PREFIX = "# newdoc id="


@dataclass(frozen=True)
class LabeledSentence:
    """Token sequence with aligned IOB tags and its document-position feature."""

    tokens: tuple[str, ...]
    tags: tuple[str, ...]
    rel_pos: float = 0.0

    def __post_init__(self):
        if len(self.tokens) != len(self.tags) or len(self.tokens) == 0:
            raise ValueError(
                f"need equal, non-zero token/tag counts, got {len(self.tokens)}/{len(self.tags)}"
            )
        bad = [t for t in self.tags if t not in TAG_SET]
        if bad:
            raise ValueError(f"invalid tags {bad!r}; expected B/I/O")
        if not 0.0 <= self.rel_pos <= 1.0:
            raise ValueError(f"rel_pos must be in [0, 1], got {self.rel_pos}")

    @property
    def argumentative(self) -> bool:
        """True iff the sentence contains any argument component token."""
        return any(t != "O" for t in self.tags)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[LabeledSentence, ...]

    def __post_init__(self):
        positions = [s.rel_pos for s in self.sentences]
        if any(b < a for a, b in zip(positions, positions[1:])):
            raise ValueError(f"document {self.id}: rel_pos must be non-decreasing")


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate document ids")

    def sentences(self) -> list[LabeledSentence]:
        return [s for d in self.documents for s in d.sentences]


def relative_position(i: int, n: int) -> float:
    """Sentence index normalized to [0, 1] within its document; 0.0 for a
    single-sentence document."""
    if n < 1 or i < 0 or i >= n:
        raise ValueError(f"sentence index {i} out of range for document length {n}")
    if n == 1:
        return 0.0
    return i / (n - 1)


def make_document(doc_id: str, sentences: list[tuple[tuple[str, ...], tuple[str, ...]]]) -> Document:
    """Build a Document, deriving each sentence's rel_pos from its index."""
    n = len(sentences)
    built = tuple(
        LabeledSentence(tokens=toks, tags=tags, rel_pos=relative_position(i, n))
        for i, (toks, tags) in enumerate(sentences)
    )
    return Document(id=doc_id, sentences=built)


def parse_conll(text: str) -> Corpus:
    """Parse CoNLL-style text into a Corpus.

    Raises ParseError (with a 1-based line number) on unknown tags, token
    lines without exactly one tab, or documents with no sentences.
    """
    documents: list[Document] = []
    doc_id: str | None = None
    doc_sentences: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
    tokens: list[str] = []
    tags: list[str] = []
    header_line = 0
    implicit_counter = 0

    def flush_sentence():
        nonlocal tokens, tags
        if tokens:
            doc_sentences.append((tuple(tokens), tuple(tags)))
            tokens, tags = [], []

    def flush_document(at_line: int):
        nonlocal doc_sentences, doc_id, implicit_counter
        flush_sentence()
        if doc_id is None and not doc_sentences:
            return  # nothing seen yet
        if not doc_sentences:
            raise ParseError(f"document {doc_id!r} has no sentences", line=at_line)
        if doc_id is None:
            doc_id = f"doc{implicit_counter}"
            implicit_counter += 1
        documents.append(make_document(doc_id, doc_sentences))
        doc_sentences = []
        doc_id = None

    lines = text.split("\n")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        if line.startswith("# newdoc"):
            if not line.startswith(_NEWDOC_PREFIX) or not line[len(_NEWDOC_PREFIX):]:
                raise ParseError("malformed document header; expected '# newdoc id=<string>'", line=lineno)
            flush_document(lineno)
            doc_id = line[len(_NEWDOC_PREFIX):]
            header_line = lineno
            continue
        if not line.strip():
            flush_sentence()
            continue
        if line.startswith("#"):
            continue  # comment inside a sentence
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(
                f"expected '<token>\\t<tag>' with exactly one tab, got {line!r}", line=lineno
            )
        token, tag = parts
        if tag not in TAG_SET:
            raise ParseError(f"unknown tag {tag!r}; expected one of B, I, O", line=lineno)
        tokens.append(token)
        tags.append(tag)

    flush_document(header_line or len(lines))
    return Corpus(documents=tuple(documents))


def serialize_conll(corpus: Corpus, arg_probs: dict[int, float] | None = None) -> str:
    """Inverse of parse_conll.

    ``arg_probs`` optionally maps a flat sentence index to a classifier
    probability, emitted as a ``# arg_prob=`` comment after the sentence.
    """
    out: list[str] = []
    flat_index = 0
    for doc in corpus.documents:
        out.append(f"# newdoc id={doc.id}")
        for sent in doc.sentences:
            for token, tag in zip(sent.tokens, sent.tags):
                out.append(f"{token}\t{tag}")
            if arg_probs is not None and flat_index in arg_probs:
                out.append(f"# arg_prob={arg_probs[flat_index]:.6f}")
            out.append("")
            flat_index += 1
    return "\n".join(out) + "\n"


def undersample(
    sentences: list[LabeledSentence], ratio: float, rng: Prng
) -> list[LabeledSentence]:
    """Keep all argumentative sentences and at most ``ratio`` times as many
    non-argumentative ones, sampled uniformly without replacement. Original
    order is preserved."""
    if ratio <= 0:
        raise ConfigError(f"undersample ratio must be positive, got {ratio}")
    arg_count = sum(1 for s in sentences if s.argumentative)
    if arg_count == 0:
        raise ConfigError("cannot undersample: no argumentative sentences in the training set")
    non_arg_positions = [i for i, s in enumerate(sentences) if not s.argumentative]
    keep_non = min(len(non_arg_positions), math.floor(ratio * arg_count))
    chosen = rng.sample_indices(len(non_arg_positions), keep_non)
    kept = {non_arg_positions[i] for i in chosen}
    return [s for i, s in enumerate(sentences) if s.argumentative or i in kept]


def split_validation(
    sentences: list[LabeledSentence], fraction: float, rng: Prng
) -> tuple[list[LabeledSentence], list[LabeledSentence]]:
    """Uniform sentence-level split; validation gets round(fraction * total)."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"validation fraction must be in (0, 1), got {fraction}")
    total = len(sentences)
    n_val = math.floor(fraction * total + 0.5)
    if n_val == 0 or n_val == total:
        raise ConfigError(
            f"validation split of {fraction} on {total} sentences leaves one side empty"
        )
    val_idx = set(rng.sample_indices(total, n_val))
    train = [s for i, s in enumerate(sentences) if i not in val_idx]
    val = [s for i, s in enumerate(sentences) if i in val_idx]
    return train, val


def corpus_stats(corpus: Corpus) -> dict[str, float]:
    """Counts used by the `stats` CLI command."""
    sents = corpus.sentences()
    tag_counts = {t: 0 for t in TAGS}
    for s in sents:
        for t in s.tags:
            tag_counts[t] += 1
    n_arg = sum(1 for s in sents if s.argumentative)
    return {
        "documents": len(corpus.documents),
        "sentences": len(sents),
        "tokens": sum(len(s) for s in sents),
        "tag_B": tag_counts["B"],
        "tag_I": tag_counts["I"],
        "tag_O": tag_counts["O"],
        "argumentative_sentences": n_arg,
        "argumentative_fraction": (n_arg / len(sents)) if sents else 0.0,
    }
