"""Scikit-learn-style estimators wrapping the boundary-detection models.

X is a list of token sequences (with tags in y), or a list of
LabeledSentence carrying tags and the relative-position feature directly.
All constructor arguments are hyperparameters in the sklearn sense, so
``get_params`` / ``set_params`` / ``clone`` compose with the wider
ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import Prng
from .corpus import LabeledSentence, split_validation, undersample
from .embeddings import EmbeddingTable, build_random_table, load_embedding_text
from .errors import ConfigError
from .metrics import classification_prf, token_macro_f1
from .training import TrainConfig, build_model_for_config, restore_parameters, train


def as_sentences(X, y=None, default_tag: str = "O") -> list[LabeledSentence]:
    """Validate and normalize estimator input into LabeledSentence objects.

    Accepts LabeledSentence items directly (y must then be None) or parallel
    token/tag sequences. Without y, every token gets ``default_tag``.
    """
    if len(X) == 0:
        raise ValueError("X must contain at least one sentence")
    if isinstance(X[0], LabeledSentence):
        if y is not None:
            raise ValueError("y must be None when X already carries tags")
        return list(X)
    if y is None:
        return [
            LabeledSentence(tuple(tokens), tuple(default_tag for _ in tokens))
            for tokens in X
        ]
    if len(y) != len(X):
        raise ValueError(f"X has {len(X)} sentences but y has {len(y)} tag sequences")
    out = []
    for i, (tokens, tags) in enumerate(zip(X, y)):
        if len(tokens) != len(tags):
            raise ValueError(f"sentence {i}: {len(tokens)} tokens vs {len(tags)} tags")
        out.append(LabeledSentence(tuple(tokens), tuple(tags)))
    return out


class _BoundaryEstimatorBase(BaseEstimator):
    _model_kind = "base"

    def __init__(
        self,
        hidden_size=150,
        attention_hidden=150,
        embedding_dim=300,
        num_layers=1,
        epochs=200,
        batch_size=50,
        learning_rate=0.001,
        dropout=0.5,
        l2=0.001,
        seed=0,
        undersample_ratio=None,
        validation_fraction=0.1,
        embeddings=None,
        loss_weight_cls=1.0,
        detach_p=False,
        oracle_mode=False,
    ):
        self.hidden_size = hidden_size
        self.attention_hidden = attention_hidden
        self.embedding_dim = embedding_dim
        self.num_layers = num_layers
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.l2 = l2
        self.seed = seed
        self.undersample_ratio = undersample_ratio
        self.validation_fraction = validation_fraction
        self.embeddings = embeddings
        self.loss_weight_cls = loss_weight_cls
        self.detach_p = detach_p
        self.oracle_mode = oracle_mode

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            model=self._model_kind,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            dropout=self.dropout,
            l2=self.l2,
            hidden_size=self.hidden_size,
            attention_hidden=self.attention_hidden,
            embedding_dim=self.embedding_dim,
            num_layers=self.num_layers,
            seed=self.seed,
            undersample_ratio=self.undersample_ratio,
            loss_weight_cls=self.loss_weight_cls,
            detach_p=self.detach_p,
            oracle_mode=self.oracle_mode,
            selection_metric=(
                "classification_f1" if self._model_kind == "classifier" else "token_macro_f1"
            ),
        ).validate()

    def _resolve_table(self, sentences, rng: Prng) -> EmbeddingTable:
        if isinstance(self.embeddings, EmbeddingTable):
            if self.embeddings.dim != self.embedding_dim:
                raise ConfigError(
                    f"embedding table dim {self.embeddings.dim} != embedding_dim {self.embedding_dim}"
                )
            return self.embeddings
        if isinstance(self.embeddings, str):
            return load_embedding_text(self.embeddings, self.embedding_dim, rng)
        vocab = sorted({tok for s in sentences for tok in s.tokens})
        return build_random_table(vocab, self.embedding_dim, rng)

    def fit(self, X, y=None, validation=None):
        """Train on labeled sentences; ``validation`` overrides the seeded
        validation split with an explicit LabeledSentence list."""
        config = self._train_config()
        sentences = as_sentences(X, y)
        base = Prng(config.seed)
        if self.undersample_ratio is not None:
            sentences = undersample(sentences, self.undersample_ratio, base.fork(1))
        if validation is not None:
            train_sents, val_sents = sentences, list(validation)
        else:
            train_sents, val_sents = split_validation(
                sentences, self.validation_fraction, base.fork(2)
            )
        table = self._resolve_table(train_sents, base.fork(0))
        model = build_model_for_config(config, table, base.fork(3))
        self.checkpoint_ = train(config, model, train_sents, val_sents)
        restore_parameters(model, self.checkpoint_.parameters)
        model.set_training(False)
        self.model_ = model
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ConfigError("estimator is not fitted; call fit first")

    def predict(self, X):
        self._check_fitted()
        sentences = as_sentences(X)
        return [list(self.model_.predict(s).tags) for s in sentences]

    def score(self, X, y=None):
        """Token macro-F1 against the gold tags carried by X or given in y."""
        self._check_fitted()
        sentences = as_sentences(X, y)
        return token_macro_f1([s.tags for s in sentences], self.predict(sentences))


class BiLstmTagger(_BoundaryEstimatorBase):
    """Per-token softmax tagger (no CRF)."""

    _model_kind = "bilstm"


class BiLstmCrfTagger(_BoundaryEstimatorBase):
    """Bi-LSTM encoder with a linear-chain CRF output layer."""

    _model_kind = "bilstm-crf"


class JointBoundaryTagger(_BoundaryEstimatorBase):
    """Joint model: sentence classifier probabilities feed the CRF tagger."""

    _model_kind = "joint"

    def predict_proba(self, X):
        """(n, 2) argumentative probabilities in classes_ order
        [False, True]."""
        self._check_fitted()
        sentences = as_sentences(X)
        arg = np.array([self.model_.predict(s).arg_prob for s in sentences])
        return np.column_stack([1.0 - arg, arg])


class ArgumentSentenceClassifier(_BoundaryEstimatorBase):
    """Attention-based argumentative-or-not sentence classifier."""

    _model_kind = "classifier"

    classes_ = np.array([False, True])

    def predict(self, X):
        self._check_fitted()
        sentences = as_sentences(X)
        return [bool(self.model_.predict(s).argumentative) for s in sentences]

    def predict_proba(self, X):
        self._check_fitted()
        sentences = as_sentences(X)
        arg = np.array([self.model_.predict(s).arg_prob for s in sentences])
        return np.column_stack([1.0 - arg, arg])

    def score(self, X, y=None):
        """F1 of the argumentative class."""
        self._check_fitted()
        if y is not None and len(y) and isinstance(y[0], (bool, np.bool_, int)):
            gold = [bool(v) for v in y]
            sentences = as_sentences(X)
        else:
            sentences = as_sentences(X, y)
            gold = [s.argumentative for s in sentences]
        return classification_prf(gold, self.predict(sentences)).f1
