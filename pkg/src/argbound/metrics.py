"""Token-level P/R/F1, IOB span extraction, exact-match span metrics, and
binary classification metrics.

Conventions used throughout: 0/0 ratios are 0, macro averages run over the
fixed {B, I, O} classes (absent classes count as 0), and a predicted span is
a true positive only under exact (sentence, start, end) equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import TAGS


@dataclass(frozen=True)
class Span:
    """Inclusive token range of one argument component."""

    sentence: int
    start: int
    end: int


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return ClassMetrics(p, r, f1)


def token_prf(
    gold: Sequence[Sequence[str]], predicted: Sequence[Sequence[str]]
) -> dict[str, ClassMetrics]:
    """Per-tag and macro P/R/F1 over token-level decisions.

    ``gold`` and ``predicted`` are parallel lists of tag sequences; each pair
    must have equal length.
    """
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold vs {len(predicted)} predicted sentences")
    counts = {t: [0, 0, 0] for t in TAGS}  # tp, fp, fn
    for i, (g_tags, p_tags) in enumerate(zip(gold, predicted)):
        if len(g_tags) != len(p_tags):
            raise ValueError(f"sentence {i}: {len(g_tags)} gold vs {len(p_tags)} predicted tags")
        for g, p in zip(g_tags, p_tags):
            if g == p:
                counts[g][0] += 1
            else:
                counts[p][1] += 1
                counts[g][2] += 1
    result = {t: _prf(*counts[t]) for t in TAGS}
    result["macro"] = ClassMetrics(
        precision=sum(result[t].precision for t in TAGS) / len(TAGS),
        recall=sum(result[t].recall for t in TAGS) / len(TAGS),
        f1=sum(result[t].f1 for t in TAGS) / len(TAGS),
    )
    return result


def token_macro_f1(gold, predicted) -> float:
    return token_prf(gold, predicted)["macro"].f1


def extract_spans(tags: Sequence[str], sentence: int = 0) -> list[Span]:
    """Spans start at B and extend through following I tags.

    An I directly after O (or at sentence start) also opens a span: lenient
    repair of ill-formed output, counted separately by iob_repairs().
    """
    spans: list[Span] = []
    start = None
    for i, tag in enumerate(tags):
        if tag == "B":
            if start is not None:
                spans.append(Span(sentence, start, i - 1))
            start = i
        elif tag == "I":
            if start is None:
                start = i  # lenient repair
        else:  # O
            if start is not None:
                spans.append(Span(sentence, start, i - 1))
                start = None
    if start is not None:
        spans.append(Span(sentence, start, len(tags) - 1))
    return spans


def iob_repairs(tags: Sequence[str]) -> int:
    """Number of spans that had to be opened by a bare I tag."""
    repairs = 0
    inside = False
    for tag in tags:
        if tag == "I" and not inside:
            repairs += 1
        inside = tag != "O"
    return repairs


def extract_all_spans(tag_sequences: Iterable[Sequence[str]]) -> set[Span]:
    out: set[Span] = set()
    for i, tags in enumerate(tag_sequences):
        out.update(extract_spans(tags, sentence=i))
    return out


def exact_match_prf(gold: set[Span], predicted: set[Span]) -> ClassMetrics:
    """Exact-match span P/R/F1: a predicted span counts only if sentence and
    both endpoints equal a gold span."""
    tp = len(gold & predicted)
    return _prf(tp, len(predicted) - tp, len(gold) - tp)


def classification_prf(
    gold: Sequence[bool], predicted: Sequence[bool]
) -> ClassMetrics:
    """Binary P/R/F1 with argumentative as the positive class."""
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold vs {len(predicted)} predicted flags")
    tp = sum(1 for g, p in zip(gold, predicted) if g and p)
    fp = sum(1 for g, p in zip(gold, predicted) if not g and p)
    fn = sum(1 for g, p in zip(gold, predicted) if g and not p)
    return _prf(tp, fp, fn)
