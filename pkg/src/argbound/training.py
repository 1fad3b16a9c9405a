"""Mini-batch Adam training with L2 regularization and validation-based
checkpoint selection.

Sentences are variable-length and never padded: per-sentence gradients are
accumulated across a batch (scaled by 1/batch) and one optimizer step runs
per batch. Everything is driven by a single seed, so a (seed, config, data)
triple reproduces checkpoints exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import Parameter, Prng, Tensor, accumulate
from .corpus import LabeledSentence
from .embeddings import EmbeddingTable
from .errors import ConfigError, TrainingError
from .metrics import classification_prf, token_macro_f1
from .models import MODEL_KINDS, ModelBase, build_model

SELECTION_METRICS = ("token_macro_f1", "classification_f1")


@dataclass
class TrainConfig:
    model: str = "joint"
    learning_rate: float = 0.001
    batch_size: int = 50
    epochs: int = 200
    dropout: float = 0.5
    l2: float = 0.001
    hidden_size: int = 150
    attention_hidden: int = 150
    embedding_dim: int = 300
    num_layers: int = 1
    seed: int = 0
    undersample_ratio: float | None = None
    loss_weight_cls: float = 1.0
    detach_p: bool = False
    oracle_mode: bool = False
    selection_metric: str = "token_macro_f1"
    shared_dropout_masks: bool = False
    l2_include_biases: bool = False

    def validate(self) -> "TrainConfig":
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model!r}; expected one of {MODEL_KINDS}")
        if self.selection_metric not in SELECTION_METRICS:
            raise ConfigError(
                f"unknown selection metric {self.selection_metric!r}; expected one of {SELECTION_METRICS}"
            )
        if self.model == "classifier" and self.selection_metric == "token_macro_f1":
            raise ConfigError("the classifier model cannot be selected on token_macro_f1")
        for name in (
            "learning_rate",
            "batch_size",
            "hidden_size",
            "attention_hidden",
            "embedding_dim",
            "num_layers",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")
        if self.undersample_ratio is not None and self.undersample_ratio <= 0:
            raise ConfigError(f"undersample_ratio must be positive, got {self.undersample_ratio}")
        return self


@dataclass
class Checkpoint:
    """Snapshot of everything needed to reproduce predictions."""

    model_kind: str
    config: dict
    vocabulary: list[str]
    parameters: dict[str, np.ndarray]
    best_val_score: float
    epoch: int


class AdamState:
    """Per-parameter first/second moments with bias correction.

    Update: m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps). Grads are zeroed
    after each step.
    """

    def __init__(self, params: Sequence[Parameter], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]


def adam_step(adam: AdamState, lr: float) -> None:
    adam.t += 1
    bc1 = 1.0 - adam.beta1**adam.t
    bc2 = 1.0 - adam.beta2**adam.t
    for i, p in enumerate(adam.params):
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {p.name!r}")
        adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g
        adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * (g * g)
        m_hat = adam.m[i] / bc1
        v_hat = adam.v[i] / bc2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + adam.eps)
        p.zero_grad()


def regularized_parameters(model: ModelBase, include_biases: bool = False) -> list[Parameter]:
    """Weight matrices only by default; biases and embeddings stay out."""
    out = []
    for p in model.parameters():
        if p.name.startswith("embedding."):
            continue
        if p.data.ndim < 2 and not include_biases:
            continue
        out.append(p)
    return out


def l2_penalty(params: Sequence[Parameter], weight: float) -> Tensor:
    """weight * sum of squared entries, as one graph node (gradient
    2*weight*theta per entry)."""
    if weight < 0:
        raise ValueError(f"l2 weight must be >= 0, got {weight}")
    params = list(params)
    value = weight * sum(float((p.data * p.data).sum()) for p in params)

    def backward(g, grads):
        for p in params:
            accumulate(grads, p, (2.0 * weight * float(g)) * p.data)

    return Tensor(value, _parents=tuple(params), _backward=backward)


def validation_score(model: ModelBase, sentences: Sequence[LabeledSentence], metric: str) -> float:
    if metric == "classification_f1":
        gold = [s.argumentative for s in sentences]
        pred = [model.predict(s).argumentative for s in sentences]
        return classification_prf(gold, pred).f1
    gold_tags = [s.tags for s in sentences]
    pred_tags = [model.predict(s).tags for s in sentences]
    return token_macro_f1(gold_tags, pred_tags)


def snapshot_parameters(model: ModelBase) -> dict[str, np.ndarray]:
    snap = {p.name: p.data.copy() for p in model.parameters()}
    snap["embedding.matrix"] = model.table.matrix.copy()
    return snap


def restore_parameters(model: ModelBase, snap: dict[str, np.ndarray]) -> None:
    for p in model.parameters():
        p.data[...] = snap[p.name]


def train(
    config: TrainConfig,
    model: ModelBase,
    train_sentences: Sequence[LabeledSentence],
    val_sentences: Sequence[LabeledSentence],
    log: Callable[[str], None] | None = None,
) -> Checkpoint:
    """Epoch loop: seeded shuffle, batched gradient accumulation, one Adam
    step per batch, per-epoch validation, best-checkpoint retention.

    Returns the best checkpoint seen; with epochs=0 that is the untouched
    initialization with a -inf sentinel score.
    """
    if not train_sentences or not val_sentences:
        raise ConfigError("training and validation sets must be non-empty")
    config.validate()
    rng = Prng(config.seed).fork(0x5E)
    adam = AdamState(model.parameters())
    reg_params = regularized_parameters(model, config.l2_include_biases)

    best_score = float("-inf")
    best_snap = snapshot_parameters(model)
    best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        model.set_training(True)
        order = rng.permutation(len(train_sentences))
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_sentences[i] for i in order[start : start + config.batch_size]]
            batch_loss = 0.0
            for sent in batch:
                loss = model.loss(sent)
                loss.backward(seed=1.0 / len(batch))
                batch_loss += loss.item() / len(batch)
            if config.l2 > 0:
                penalty = l2_penalty(reg_params, config.l2)
                penalty.backward()
                batch_loss += penalty.item()
            adam_step(adam, config.learning_rate)
            epoch_losses.append(batch_loss)

        model.set_training(False)
        score = validation_score(model, val_sentences, config.selection_metric)
        if np.isnan(score):
            raise TrainingError(f"validation score is NaN at epoch {epoch}")
        if score > best_score:
            best_score = score
            best_snap = snapshot_parameters(model)
            best_epoch = epoch
        if log is not None:
            train_loss = float(np.mean(epoch_losses))
            log(
                f"epoch={epoch} train_loss={train_loss:.6f} "
                f"val_f1={score:.6f} best={best_score:.6f}"
            )

    return Checkpoint(
        model_kind=config.model,
        config=asdict(config),
        vocabulary=list(model.table.words),
        parameters=best_snap,
        best_val_score=best_score,
        epoch=best_epoch,
    )


def build_model_for_config(config: TrainConfig, table: EmbeddingTable, rng: Prng) -> ModelBase:
    return build_model(
        config.model,
        table,
        rng,
        hidden=config.hidden_size,
        attention_hidden=config.attention_hidden,
        dropout=config.dropout,
        shared_dropout_masks=config.shared_dropout_masks,
        loss_weight_cls=config.loss_weight_cls,
        detach_p=config.detach_p,
        oracle_mode=config.oracle_mode,
        num_layers=config.num_layers,
    )
