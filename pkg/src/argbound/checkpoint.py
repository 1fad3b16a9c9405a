"""Checkpoint files: versioned JSON with all parameter tensors.

The default format stores flat fp64 arrays inline; ``binary=True`` moves
the raw values into a little-endian float64 sidecar blob next to the JSON,
which the JSON references by name. Save -> load -> save is byte-identical
in both formats.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .autodiff import Prng
from .embeddings import EmbeddingTable
from .errors import CheckpointError
from .models import ModelBase
from .training import Checkpoint, TrainConfig, build_model_for_config, restore_parameters

FORMAT_VERSION = 1

MODEL_INIT_SALT = 3  # keep in sync with the cli seed discipline


def save_checkpoint(ckpt: Checkpoint, path: str, binary: bool = False) -> None:
    names = sorted(ckpt.parameters)
    obj = {
        "format_version": FORMAT_VERSION,
        "model_kind": ckpt.model_kind,
        "config": ckpt.config,
        "vocabulary": ckpt.vocabulary,
        "best_val_score": ckpt.best_val_score,
        "epoch": ckpt.epoch,
    }
    if binary:
        sidecar = os.path.basename(path) + ".bin"
        params = {}
        offset = 0
        with open(path + ".bin", "wb") as blob:
            for name in names:
                arr = np.ascontiguousarray(ckpt.parameters[name], dtype="<f8")
                blob.write(arr.tobytes())
                params[name] = {
                    "shape": list(arr.shape),
                    "offset": offset,
                    "count": int(arr.size),
                }
                offset += arr.size
        obj["sidecar"] = sidecar
        obj["parameters"] = params
    else:
        obj["parameters"] = {
            name: {
                "shape": list(ckpt.parameters[name].shape),
                "data": ckpt.parameters[name].reshape(-1).tolist(),
            }
            for name in names
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if obj.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {obj.get('format_version')!r}"
        )
    blob = None
    if "sidecar" in obj:
        sidecar_path = os.path.join(os.path.dirname(path) or ".", obj["sidecar"])
        try:
            blob = np.fromfile(sidecar_path, dtype="<f8")
        except OSError as e:
            raise CheckpointError(f"cannot read sidecar {sidecar_path}: {e}") from e
    parameters = {}
    for name, entry in obj["parameters"].items():
        shape = tuple(entry["shape"])
        expected = math.prod(shape)
        if blob is None:
            data = np.asarray(entry["data"], dtype=np.float64)
        else:
            data = blob[entry["offset"] : entry["offset"] + entry["count"]]
        if data.size != expected:
            raise CheckpointError(
                f"parameter {name!r}: {data.size} values do not fill shape {shape}"
            )
        parameters[name] = data.reshape(shape)
    return Checkpoint(
        model_kind=obj["model_kind"],
        config=obj["config"],
        vocabulary=list(obj["vocabulary"]),
        parameters=parameters,
        best_val_score=obj["best_val_score"],
        epoch=obj["epoch"],
    )


def model_from_checkpoint(ckpt: Checkpoint) -> ModelBase:
    """Rebuild the model and load the stored tensors into it."""
    try:
        config = TrainConfig(**ckpt.config)
    except TypeError as e:
        raise CheckpointError(f"bad config snapshot: {e}") from e
    matrix = ckpt.parameters.get("embedding.matrix")
    if matrix is None:
        raise CheckpointError("checkpoint is missing embedding.matrix")
    if matrix.shape != (len(ckpt.vocabulary) + 1, config.embedding_dim):
        raise CheckpointError(
            f"embedding matrix {matrix.shape} does not match vocabulary size "
            f"{len(ckpt.vocabulary)} + UNK at dimension {config.embedding_dim}"
        )
    table = EmbeddingTable(ckpt.vocabulary, matrix)
    model = build_model_for_config(config, table, Prng(config.seed).fork(MODEL_INIT_SALT))
    for p in model.parameters():
        stored = ckpt.parameters.get(p.name)
        if stored is None:
            raise CheckpointError(f"checkpoint is missing parameter {p.name!r}")
        if stored.shape != p.data.shape:
            raise CheckpointError(
                f"parameter {p.name!r}: checkpoint shape {stored.shape} != model shape {p.data.shape}"
            )
    restore_parameters(model, ckpt.parameters)
    model.set_training(False)
    return model
