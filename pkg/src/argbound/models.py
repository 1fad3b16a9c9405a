"""The four boundary-detection models: per-token Bi-LSTM tagger, Bi-LSTM-CRF,
attention-based sentence classifier, and the joint model that feeds the
classifier's predicted probabilities into the boundary tagger.

Class order in every 2-way output is (argumentative, non-argumentative),
so index 0 is the argumentative probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Parameter,
    Prng,
    Tensor,
    add,
    concat,
    cross_entropy_logits,
    broadcast_row,
    dropout_mask,
    glorot_uniform,
    matmul,
    max_pool_over_time,
    mul,
    reshape,
    softmax,
    tanh,
    transpose,
)
from .corpus import LabeledSentence
from .crf import INDEX_TAG, TAG_INDEX, CrfParams, crf_nll, viterbi
from .embeddings import EmbeddingTable, embed_sentence
from .lstm import BiLstmParams, bilstm_forward

N_TAGS = 3
ARG_CLASS = 0  # argumentative
NON_ARG_CLASS = 1

MODEL_KINDS = ("bilstm", "bilstm-crf", "classifier", "joint")


@dataclass
class Prediction:
    tags: list[str] | None
    argumentative: bool | None
    arg_prob: float | None


class ModelBase:
    """Shared plumbing: embedding, Bi-LSTM encoder, dropout handling."""

    kind = "base"

    def __init__(
        self,
        table: EmbeddingTable,
        hidden: int,
        rng: Prng,
        dropout: float = 0.5,
        shared_dropout_masks: bool = False,
        num_layers: int = 1,
    ):
        if num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {num_layers}")
        self.table = table
        self.hidden = hidden
        self.dropout = dropout
        self.shared_dropout_masks = shared_dropout_masks
        self.training = True
        self.dropout_rng = rng.fork(0xD0)
        # Extra layers read the previous layer's (T, 2H) output.
        self.bilstm_stack = [BiLstmParams(table.dim, hidden, rng)]
        for i in range(1, num_layers):
            self.bilstm_stack.append(BiLstmParams(2 * hidden, hidden, rng, prefix=f"bilstm{i}"))
        self.bilstm = self.bilstm_stack[0]

    def parameters(self) -> list[Parameter]:
        encoder = [p for layer in self.bilstm_stack for p in layer.parameters()]
        return [self.table.unk] + encoder + self._head_parameters()

    def _head_parameters(self) -> list[Parameter]:
        raise NotImplementedError

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def set_training(self, flag: bool) -> None:
        self.training = flag

    def _apply_dropout(self, m: Tensor) -> Tensor:
        if not self.training or self.dropout == 0.0:
            return m
        shape = (1, m.shape[1]) if self.shared_dropout_masks else m.shape
        return mul(m, dropout_mask(shape, self.dropout, self.dropout_rng, training=True))

    def encode(self, sentence: LabeledSentence) -> tuple[Tensor, Tensor]:
        """Returns (raw embeddings (T, d), Bi-LSTM output (T, 2H)).

        Dropout wraps the encoder on both sides; the raw embeddings stay
        undropped for the attention branch.
        """
        x = embed_sentence(sentence, self.table)
        h = self._apply_dropout(x)
        for layer in self.bilstm_stack:
            h = bilstm_forward(h, layer)
        return x, self._apply_dropout(h)

    def loss(self, sentence: LabeledSentence) -> Tensor:
        raise NotImplementedError

    def predict(self, sentence: LabeledSentence) -> Prediction:
        was_training = self.training
        self.training = False
        try:
            return self._predict(sentence)
        finally:
            self.training = was_training

    def _predict(self, sentence: LabeledSentence) -> Prediction:
        raise NotImplementedError


def _rel_pos_column(sentence: LabeledSentence, steps: int) -> Tensor:
    return Tensor(np.full((steps, 1), sentence.rel_pos))


def _gold_path(sentence: LabeledSentence) -> list[int]:
    return [TAG_INDEX[t] for t in sentence.tags]


class BiLstmTaggerModel(ModelBase):
    """Baseline: independent per-token softmax over a linear map of
    [h_t; rel_pos]."""

    kind = "bilstm"

    def __init__(self, table, hidden, rng, **kw):
        super().__init__(table, hidden, rng, **kw)
        self.head_w = Parameter(glorot_uniform((N_TAGS, 2 * hidden + 1), rng), "head.w")
        self.head_b = Parameter(np.zeros(N_TAGS), "head.b")

    def _head_parameters(self):
        return [self.head_w, self.head_b]

    def logits(self, sentence: LabeledSentence) -> Tensor:
        _, h = self.encode(sentence)
        feats = concat([h, _rel_pos_column(sentence, h.shape[0])], axis=1)
        return add(matmul(feats, transpose(self.head_w)), self.head_b)

    def tagger_forward(self, sentence: LabeledSentence) -> Tensor:
        """(T, k) matrix of per-token tag distributions."""
        return softmax(self.logits(sentence), axis=1)

    def loss(self, sentence: LabeledSentence) -> Tensor:
        return cross_entropy_logits(self.logits(sentence), _gold_path(sentence))

    def _predict(self, sentence: LabeledSentence) -> Prediction:
        probs = self.tagger_forward(sentence).data
        tags = [INDEX_TAG[int(i)] for i in probs.argmax(axis=1)]
        return Prediction(tags=tags, argumentative=any(t != "O" for t in tags), arg_prob=None)


class BiLstmCrfModel(ModelBase):
    """Bi-LSTM encoder with a connection layer producing CRF emissions."""

    kind = "bilstm-crf"

    def __init__(self, table, hidden, rng, **kw):
        super().__init__(table, hidden, rng, **kw)
        self.conn_w = Parameter(glorot_uniform((N_TAGS, 2 * hidden + 1), rng), "connection.w")
        self.conn_b = Parameter(np.zeros(N_TAGS), "connection.b")
        self.crf = CrfParams(N_TAGS)

    def _head_parameters(self):
        return [self.conn_w, self.conn_b, self.crf.transitions]

    def emissions(self, sentence: LabeledSentence) -> Tensor:
        """(T, k) score matrix fed to the CRF layer."""
        _, h = self.encode(sentence)
        feats = concat([h, _rel_pos_column(sentence, h.shape[0])], axis=1)
        return add(matmul(feats, transpose(self.conn_w)), self.conn_b)

    def loss(self, sentence: LabeledSentence) -> Tensor:
        return crf_nll(self.emissions(sentence), self.crf, _gold_path(sentence))

    def _predict(self, sentence: LabeledSentence) -> Prediction:
        path, _ = viterbi(self.emissions(sentence), self.crf)
        tags = [INDEX_TAG[i] for i in path]
        return Prediction(tags=tags, argumentative=any(t != "O" for t in tags), arg_prob=None)


class AttentionClassifierModel(ModelBase):
    """Argumentative-or-not sentence classifier over [max-pooled Bi-LSTM;
    attention-pooled embeddings; rel_pos]."""

    kind = "classifier"

    def __init__(self, table, hidden, rng, attention_hidden: int = 150, **kw):
        super().__init__(table, hidden, rng, **kw)
        self.attention_hidden = attention_hidden
        d = table.dim
        self.attn_w = Parameter(glorot_uniform((attention_hidden, d), rng), "attention.w")
        self.attn_b = Parameter(np.zeros(attention_hidden), "attention.b")
        self.attn_u = Parameter(glorot_uniform((1, attention_hidden), rng), "attention.u")
        self.cls_w = Parameter(glorot_uniform((2, 2 * hidden + d + 1), rng), "classifier.w")
        self.cls_b = Parameter(np.zeros(2), "classifier.b")

    def _head_parameters(self):
        return [self.attn_w, self.attn_b, self.attn_u, self.cls_w, self.cls_b]

    def attention_pool(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Weighted sum of the word embeddings; returns (a (d,), alphas (T,))."""
        f = tanh(add(matmul(self.attn_w, transpose(x)), reshape(self.attn_b, (-1, 1))))
        alphas = softmax(reshape(matmul(self.attn_u, f), (-1,)))
        return matmul(transpose(x), alphas), alphas

    def _classifier_logits(self, sentence: LabeledSentence, x: Tensor, h: Tensor) -> Tensor:
        r = max_pool_over_time(h)
        a, _ = self.attention_pool(x)
        s = Tensor(np.array([sentence.rel_pos]))
        feats = concat([r, a, s], axis=0)
        return add(matmul(self.cls_w, feats), self.cls_b)

    def classify(self, sentence: LabeledSentence) -> Tensor:
        """2-way probability vector, argumentative class first."""
        x, h = self.encode(sentence)
        return softmax(self._classifier_logits(sentence, x, h))

    def loss(self, sentence: LabeledSentence) -> Tensor:
        x, h = self.encode(sentence)
        target = ARG_CLASS if sentence.argumentative else NON_ARG_CLASS
        return cross_entropy_logits(self._classifier_logits(sentence, x, h), target)

    def _predict(self, sentence: LabeledSentence) -> Prediction:
        probs = self.classify(sentence).data
        return Prediction(
            tags=None,
            argumentative=bool(probs.argmax() == ARG_CLASS),
            arg_prob=float(probs[ARG_CLASS]),
        )


class JointModel(AttentionClassifierModel):
    """One shared Bi-LSTM pass feeds both the classifier head and a CRF
    boundary head whose per-token features are [h_t; rel_pos; p], with p the
    classifier's predicted 2-way distribution (or the one-hot gold status in
    oracle mode)."""

    kind = "joint"

    def __init__(
        self,
        table,
        hidden,
        rng,
        attention_hidden: int = 150,
        loss_weight_cls: float = 1.0,
        detach_p: bool = False,
        oracle_mode: bool = False,
        **kw,
    ):
        super().__init__(table, hidden, rng, attention_hidden=attention_hidden, **kw)
        self.loss_weight_cls = loss_weight_cls
        self.detach_p = detach_p
        self.oracle_mode = oracle_mode
        # With detach_p the status vector is a constant of the emission path;
        # finite-difference checks must hold it fixed to match that semantic.
        self.pinned_status_probs: np.ndarray | None = None
        self.boundary_w = Parameter(
            glorot_uniform((N_TAGS, 2 * hidden + 1 + 2), rng), "boundary.w"
        )
        self.boundary_b = Parameter(np.zeros(N_TAGS), "boundary.b")
        self.crf = CrfParams(N_TAGS)

    def _head_parameters(self):
        return super()._head_parameters() + [
            self.boundary_w,
            self.boundary_b,
            self.crf.transitions,
        ]

    def _forward_parts(self, sentence: LabeledSentence) -> dict:
        x, h = self.encode(sentence)
        logits = self._classifier_logits(sentence, x, h)
        hc = softmax(logits)
        if self.oracle_mode:
            one_hot = np.zeros(2)
            one_hot[ARG_CLASS if sentence.argumentative else NON_ARG_CLASS] = 1.0
            p = Tensor(one_hot)
        elif self.detach_p:
            pinned = self.pinned_status_probs
            p = Tensor(hc.data.copy() if pinned is None else pinned)
        else:
            p = hc
        steps = h.shape[0]
        feats = concat(
            [h, _rel_pos_column(sentence, steps), broadcast_row(p, steps)], axis=1
        )
        emissions = tanh(add(matmul(feats, transpose(self.boundary_w)), self.boundary_b))
        return {"logits": logits, "hc": hc, "emissions": emissions}

    def joint_forward(self, sentence: LabeledSentence) -> tuple[Tensor, Tensor]:
        parts = self._forward_parts(sentence)
        return parts["hc"], parts["emissions"]

    def loss(self, sentence: LabeledSentence) -> Tensor:
        parts = self._forward_parts(sentence)
        target = ARG_CLASS if sentence.argumentative else NON_ARG_CLASS
        ce = cross_entropy_logits(parts["logits"], target)
        nll = crf_nll(parts["emissions"], self.crf, _gold_path(sentence))
        return add(mul(Tensor(self.loss_weight_cls), ce), nll)

    def _predict(self, sentence: LabeledSentence) -> Prediction:
        parts = self._forward_parts(sentence)
        path, _ = viterbi(parts["emissions"], self.crf)
        probs = parts["hc"].data
        return Prediction(
            tags=[INDEX_TAG[i] for i in path],
            argumentative=bool(probs.argmax() == ARG_CLASS),
            arg_prob=float(probs[ARG_CLASS]),
        )


def build_model(
    kind: str,
    table: EmbeddingTable,
    rng: Prng,
    hidden: int = 150,
    attention_hidden: int = 150,
    dropout: float = 0.5,
    shared_dropout_masks: bool = False,
    loss_weight_cls: float = 1.0,
    detach_p: bool = False,
    oracle_mode: bool = False,
    num_layers: int = 1,
) -> ModelBase:
    common = dict(
        dropout=dropout, shared_dropout_masks=shared_dropout_masks, num_layers=num_layers
    )
    if kind == "bilstm":
        return BiLstmTaggerModel(table, hidden, rng, **common)
    if kind == "bilstm-crf":
        return BiLstmCrfModel(table, hidden, rng, **common)
    if kind == "classifier":
        return AttentionClassifierModel(table, hidden, rng, attention_hidden=attention_hidden, **common)
    if kind == "joint":
        return JointModel(
            table,
            hidden,
            rng,
            attention_hidden=attention_hidden,
            loss_weight_cls=loss_weight_cls,
            detach_p=detach_p,
            oracle_mode=oracle_mode,
            **common,
        )
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
