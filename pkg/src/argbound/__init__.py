"""Argument component boundary detection via neural sequence labeling.

Models: per-token Bi-LSTM tagger, Bi-LSTM-CRF, attention-based sentence
classifier, and a joint model feeding predicted argumentative status into
the boundary tagger. Everything runs on a small fp64 autodiff core that is
verified against central finite differences.
"""

from .autodiff import Parameter, Prng, Tensor, gradient_check, gradient_check_report
from .corpus import (
    Corpus,
    Document,
    LabeledSentence,
    parse_conll,
    relative_position,
    serialize_conll,
    split_validation,
    undersample,
)
from .embeddings import EmbeddingTable, build_random_table, embed_sentence, load_embedding_text
from .estimators import (
    ArgumentSentenceClassifier,
    BiLstmCrfTagger,
    BiLstmTagger,
    JointBoundaryTagger,
)
from .metrics import (
    Span,
    classification_prf,
    exact_match_prf,
    extract_spans,
    token_macro_f1,
    token_prf,
)
from .models import build_model
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ArgumentSentenceClassifier",
    "BiLstmCrfTagger",
    "BiLstmTagger",
    "Corpus",
    "Document",
    "EmbeddingTable",
    "JointBoundaryTagger",
    "LabeledSentence",
    "Parameter",
    "Prng",
    "Span",
    "Tensor",
    "TrainConfig",
    "build_model",
    "build_random_table",
    "classification_prf",
    "embed_sentence",
    "exact_match_prf",
    "extract_spans",
    "gradient_check",
    "gradient_check_report",
    "load_embedding_text",
    "parse_conll",
    "relative_position",
    "serialize_conll",
    "split_validation",
    "token_macro_f1",
    "token_prf",
    "train",
    "undersample",
]
