"""Command-line surface: train, predict, evaluate, gradcheck, stats, synth.

Exit codes are stable: 0 ok, 1 gradient-check failure, 2 bad configuration,
3 data parse error, 4 checkpoint/model mismatch, 5 gold/pred misalignment.
The ``ARGBOUND_SEED`` environment variable supplies the default seed when a
config file does not set one.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys


from .autodiff import Prng, gradient_check_report
from .checkpoint import MODEL_INIT_SALT, load_checkpoint, model_from_checkpoint, save_checkpoint
from .corpus import (
    Corpus,
    Document,
    LabeledSentence,
    corpus_stats,
    parse_conll,
    serialize_conll,
    split_validation,
    undersample,
)
from .embeddings import build_random_table, load_embedding_text
from .errors import (
    AlignmentError,
    CheckpointError,
    ConfigError,
    ParseError,
)
from .metrics import (
    classification_prf,
    exact_match_prf,
    extract_all_spans,
    iob_repairs,
    token_prf,
)
from .models import MODEL_KINDS, build_model
from .synthetic import VOCAB, generate_corpus
from .training import TrainConfig, build_model_for_config, train

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MODEL_MISMATCH = 4
EXIT_ALIGNMENT = 5

GRADCHECK_TOLERANCE = 1e-4

PRESETS = {
    "essays": {"hidden_size": 150, "embedding_dim": 300},
    "wikipedia": {"hidden_size": 80, "embedding_dim": 300},
}

_PATH_KEYS = ("train_path", "embeddings_path", "output_path", "validation_fraction")
_CONFIG_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} | set(_PATH_KEYS) | {"preset"}


def default_seed() -> int:
    try:
        return int(os.environ.get("ARGBOUND_SEED", "0"))
    except ValueError:
        return 0


def load_run_config(path: str) -> tuple[TrainConfig, dict]:
    """Read a run config JSON; unknown keys are rejected."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    merged: dict = {"seed": default_seed()}
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update(raw)

    paths = {k: merged.pop(k) for k in _PATH_KEYS if k in merged}
    paths.setdefault("validation_fraction", 0.1)
    try:
        config = TrainConfig(**merged)
    except TypeError as e:
        raise ConfigError(f"bad config value: {e}") from e
    config.validate()
    return config, paths


def _read_corpus(path: str) -> Corpus:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_conll(fh.read())
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e


def cmd_train(args) -> int:
    config, paths = load_run_config(args.config)
    if args.train:
        paths["train_path"] = args.train
    if args.out:
        paths["output_path"] = args.out
    for key in ("train_path", "output_path"):
        if key not in paths:
            raise ConfigError(f"config is missing {key} (or pass the matching flag)")

    corpus = _read_corpus(paths["train_path"])
    sentences = corpus.sentences()
    base = Prng(config.seed)
    if "embeddings_path" in paths and paths["embeddings_path"]:
        table = load_embedding_text(paths["embeddings_path"], config.embedding_dim, base.fork(0))
    else:
        vocab = sorted({tok for s in sentences for tok in s.tokens})
        table = build_random_table(vocab, config.embedding_dim, base.fork(0))
    if config.undersample_ratio is not None:
        sentences = undersample(sentences, config.undersample_ratio, base.fork(1))
    train_sents, val_sents = split_validation(
        sentences, paths["validation_fraction"], base.fork(2)
    )
    model = build_model_for_config(config, table, base.fork(MODEL_INIT_SALT))
    ckpt = train(config, model, train_sents, val_sents, log=print)
    save_checkpoint(ckpt, paths["output_path"], binary=args.binary_params)
    print(f"checkpoint written to {paths['output_path']}")
    return EXIT_OK


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.model)
    if ckpt.model_kind == "classifier":
        raise CheckpointError("classifier checkpoints produce no tag sequences; use a tagger")
    model = model_from_checkpoint(ckpt)
    corpus = _read_corpus(args.input)

    arg_probs: dict[int, float] = {}
    documents = []
    flat = 0
    for doc in corpus.documents:
        new_sentences = []
        for sent in doc.sentences:
            pred = model.predict(sent)
            if pred.arg_prob is not None:
                arg_probs[flat] = pred.arg_prob
            new_sentences.append(
                LabeledSentence(sent.tokens, tuple(pred.tags), rel_pos=sent.rel_pos)
            )
            flat += 1
        documents.append(Document(id=doc.id, sentences=tuple(new_sentences)))
    tagged = Corpus(documents=tuple(documents))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(serialize_conll(tagged, arg_probs=arg_probs or None))
    print(f"predictions written to {args.output}")
    return EXIT_OK


def _check_alignment(gold: Corpus, pred: Corpus) -> None:
    gold_sents = gold.sentences()
    pred_sents = pred.sentences()
    if len(gold_sents) != len(pred_sents):
        raise AlignmentError(
            f"{len(gold_sents)} gold sentences vs {len(pred_sents)} predicted"
        )
    for i, (g, p) in enumerate(zip(gold_sents, pred_sents)):
        if len(g) != len(p):
            raise AlignmentError(f"sentence {i}: {len(g)} gold tokens vs {len(p)} predicted")
        for j, (gt, pt) in enumerate(zip(g.tokens, p.tokens)):
            if gt != pt:
                raise AlignmentError(
                    f"token mismatch at sentence {i}, token {j}: gold {gt!r} vs predicted {pt!r}"
                )


def cmd_evaluate(args) -> int:
    gold = _read_corpus(args.gold)
    pred = _read_corpus(args.pred)
    _check_alignment(gold, pred)
    gold_sents = gold.sentences()
    pred_sents = pred.sentences()

    if args.mode == "token":
        report = token_prf([s.tags for s in gold_sents], [s.tags for s in pred_sents])
        m = report["macro"]
        print("        F1      P       R       F1-B    F1-I    F1-O")
        print(
            f"token   {m.f1:<7.3f} {m.precision:<7.3f} {m.recall:<7.3f} "
            f"{report['B'].f1:<7.3f} {report['I'].f1:<7.3f} {report['O'].f1:<7.3f}"
        )
        print(f"macro_f1={m.f1:.6f}")
        print(f"macro_p={m.precision:.6f}")
        print(f"macro_r={m.recall:.6f}")
        for tag in ("B", "I", "O"):
            print(f"f1_{tag}={report[tag].f1:.6f}")
    elif args.mode == "span":
        gold_spans = extract_all_spans(s.tags for s in gold_sents)
        pred_spans = extract_all_spans(s.tags for s in pred_sents)
        repairs = sum(iob_repairs(s.tags) for s in pred_sents)
        m = exact_match_prf(gold_spans, pred_spans)
        print("        P       R       F1      gold    pred")
        print(
            f"span    {m.precision:<7.3f} {m.recall:<7.3f} {m.f1:<7.3f} "
            f"{len(gold_spans):<7d} {len(pred_spans):<7d}"
        )
        print(f"span_p={m.precision:.6f}")
        print(f"span_r={m.recall:.6f}")
        print(f"span_f1={m.f1:.6f}")
        if repairs:
            print(f"lenient_repairs={repairs}")
    else:  # classify
        m = classification_prf(
            [s.argumentative for s in gold_sents], [s.argumentative for s in pred_sents]
        )
        print("        P       R       F1")
        print(f"classify {m.precision:<7.3f} {m.recall:<7.3f} {m.f1:<7.3f}")
        print(f"cls_p={m.precision:.6f}")
        print(f"cls_r={m.recall:.6f}")
        print(f"cls_f1={m.f1:.6f}")
    return EXIT_OK


def _gradcheck_sentence(rng: Prng, steps: int = 5) -> LabeledSentence:
    tokens = [f"t{int(i)}" for i in rng.integers(0, 12, size=steps)]
    tokens[steps // 2] = "out-of-vocabulary"  # exercise the UNK gradient path
    tags = tuple(("B", "I", "O")[int(i)] for i in rng.integers(0, 3, size=steps))
    return LabeledSentence(tuple(tokens), tags, rel_pos=0.5)


def cmd_gradcheck(args) -> int:
    rng = Prng(args.seed)
    vocab = [f"t{i}" for i in range(12)]
    table = build_random_table(vocab, 8, rng.fork(0))
    model = build_model(
        args.model,
        table,
        rng.fork(1),
        hidden=5,
        attention_hidden=6,
        dropout=0.0,
        detach_p=args.detach_p,
    )
    model.set_training(False)
    sentence = _gradcheck_sentence(rng.fork(2))
    if args.model == "joint" and args.detach_p:
        hc, _ = model.joint_forward(sentence)
        model.pinned_status_probs = hc.data.copy()
    report = gradient_check_report(lambda: model.loss(sentence), model.parameters(), eps=args.eps)
    worst = max(report.values())
    for name in sorted(report):
        status = "ok" if report[name] < GRADCHECK_TOLERANCE else "FAIL"
        print(f"{name}: max_rel_err={report[name]:.3e} {status}")
    if args.model == "joint" and args.detach_p:
        print("p-path: detached (gradient flow through p skipped)")
    print(f"worst={worst:.3e}")
    if worst >= GRADCHECK_TOLERANCE:
        failing = sorted(n for n, v in report.items() if v >= GRADCHECK_TOLERANCE)
        print(f"FAILED parameters: {', '.join(failing)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_stats(args) -> int:
    corpus = _read_corpus(args.data)
    stats = corpus_stats(corpus)
    spans = extract_all_spans(s.tags for s in corpus.sentences())
    stats["spans"] = len(spans)
    for key, value in stats.items():
        if isinstance(value, float):
            print(f"{key}={value:.6f}")
        else:
            print(f"{key}={value}")
    return EXIT_OK


def cmd_synth(args) -> int:
    rng = Prng(args.seed)
    corpus = generate_corpus(args.sentences, rng.fork(0), sentences_per_doc=args.doc_size)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_conll(corpus))
    print(f"synthetic corpus written to {args.out}")
    if args.embeddings_out:
        emb_rng = rng.fork(1)
        with open(args.embeddings_out, "w", encoding="utf-8") as fh:
            fh.write(f"{len(VOCAB)} {args.dim}\n")
            for word in VOCAB:
                values = " ".join(repr(float(v)) for v in emb_rng.normal((args.dim,)))
                fh.write(f"{word} {values}\n")
        print(f"embeddings written to {args.embeddings_out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="argbound", description="Argument component boundary detection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON run config")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--train", help="override train_path from the config")
    p.add_argument("--out", help="override output_path from the config")
    p.add_argument(
        "--binary-params", action="store_true", help="store parameters in a binary sidecar"
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="tag a CoNLL file with a trained checkpoint")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--input", required=True, help="input CoNLL file")
    p.add_argument("--output", required=True, help="output CoNLL file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="compare gold and predicted CoNLL files")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--mode", choices=("token", "span", "classify"), default="token")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--seed", type=int, default=default_seed())
    # default balances truncation against fp64 roundoff on near-zero
    # recurrent-gate gradients; tighten with --eps 1e-5 on healthy instances
    p.add_argument("--eps", type=float, default=3e-5)
    p.add_argument("--detach-p", action="store_true", dest="detach_p")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic cue-marked corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--sentences", type=int, default=200)
    p.add_argument("--seed", type=int, default=default_seed())
    p.add_argument("--doc-size", type=int, default=5)
    p.add_argument("--embeddings-out", help="also write a random embedding file")
    p.add_argument("--dim", type=int, default=16, help="dimension for --embeddings-out")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except CheckpointError as e:
        print(f"model error: {e}", file=sys.stderr)
        return EXIT_MODEL_MISMATCH
    except AlignmentError as e:
        print(f"alignment error: {e}", file=sys.stderr)
        return EXIT_ALIGNMENT


if __name__ == "__main__":
    sys.exit(main())
