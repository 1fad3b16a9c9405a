"""Linear-chain CRF: path scoring, exact log-partition, NLL, Viterbi.

Tag indices 0..k-1 are the real tags (B=0, I=1, O=2 for the IOB setting);
two extra tags START=k and END=k+1 pad the transition matrix to (k+2)^2.
START/END never appear in emitted paths. Transitions are unconstrained; any
IOB discipline is learned, not enforced.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .autodiff import Parameter, Tensor, accumulate, add, logsumexp, reshape, row, slice2d, sub
from .errors import GuardError

BRUTE_FORCE_LIMIT = 10**6

TAG_INDEX = {"B": 0, "I": 1, "O": 2}
INDEX_TAG = {v: k for k, v in TAG_INDEX.items()}


class TagIndexing:
    """Index bookkeeping for k real tags plus START/END."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError(f"need at least one real tag, got k={k}")
        self.k = k
        self.start = k
        self.end = k + 1
        self.size = k + 2


class CrfParams:
    """Learned transition scores A, A[i][j] = score of moving from tag i to
    tag j. Starts at zero; emissions break the symmetry during training."""

    def __init__(self, k: int, name: str = "crf.transitions"):
        self.tags = TagIndexing(k)
        self.transitions = Parameter(np.zeros((k + 2, k + 2)), name)

    def parameters(self) -> list[Parameter]:
        return [self.transitions]


def _check_path(path, k: int, steps: int) -> list[int]:
    y = [int(t) for t in path]
    if len(y) != steps:
        raise ValueError(f"path length {len(y)} != sequence length {steps}")
    bad = [t for t in y if not 0 <= t < k]
    if bad:
        raise ValueError(f"tags {bad} out of range [0, {k})")
    return y


def path_score(emissions: Tensor, crf: CrfParams, path) -> Tensor:
    """Transition scores along the path (START -> y1 ... yT -> END) plus the
    per-token emission scores. Single fused graph node."""
    p = emissions.data
    steps, k = p.shape
    y = _check_path(path, k, steps)
    a = crf.transitions
    tags = crf.tags

    trans_rows = np.array([tags.start] + y, dtype=np.intp)
    trans_cols = np.array(y + [tags.end], dtype=np.intp)
    token_rows = np.arange(steps)
    token_cols = np.array(y, dtype=np.intp)
    value = a.data[trans_rows, trans_cols].sum() + p[token_rows, token_cols].sum()

    def backward(g, grads):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (trans_rows, trans_cols), float(g))
        gp = np.zeros_like(p)
        gp[token_rows, token_cols] = float(g)
        accumulate(grads, a, ga)
        accumulate(grads, emissions, gp)

    return Tensor(value, _parents=(a, emissions), _backward=backward)


def log_partition(emissions: Tensor, crf: CrfParams) -> Tensor:
    """log of the sum of exp(path score) over all k^T real-tag paths, by the
    forward algorithm in log space."""
    steps, k = emissions.data.shape
    a = crf.transitions
    tags = crf.tags

    a_real = slice2d(a, 0, k, 0, k)
    from_start = reshape(slice2d(a, tags.start, tags.start + 1, 0, k), (k,))
    to_end = reshape(slice2d(a, 0, k, tags.end, tags.end + 1), (k,))

    alpha = add(row(emissions, 0), from_start)
    for t in range(1, steps):
        scores = add(reshape(alpha, (k, 1)), a_real)  # [i, j] = alpha_i + A_ij
        alpha = add(logsumexp(scores, axis=0), row(emissions, t))
    return logsumexp(add(alpha, to_end))


def crf_nll(emissions: Tensor, crf: CrfParams, gold_path) -> Tensor:
    """Negative log-probability of the gold path; nonnegative by
    construction since the partition dominates every single path."""
    return sub(log_partition(emissions, crf), path_score(emissions, crf, gold_path))


def viterbi(emissions, crf: CrfParams) -> tuple[list[int], float]:
    """Highest-scoring real-tag path and its score.

    Ties resolve to the lowest tag index at every backtrack step, so the
    decode is deterministic.
    """
    p = _as_array(emissions)
    a = _as_array(crf.transitions)
    steps, k = p.shape
    tags = crf.tags

    delta = a[tags.start, :k] + p[0]
    back: list[np.ndarray] = []
    for t in range(1, steps):
        scores = delta[:, None] + a[:k, :k]  # [i, j]
        best_prev = scores.argmax(axis=0)  # first max = lowest index
        back.append(best_prev)
        delta = scores[best_prev, np.arange(k)] + p[t]
    delta = delta + a[:k, tags.end]
    last = int(delta.argmax())
    best_score = float(delta[last])

    path = [last]
    for best_prev in reversed(back):
        path.append(int(best_prev[path[-1]]))
    path.reverse()
    return path, best_score


def _path_score_np(p: np.ndarray, a: np.ndarray, y: tuple[int, ...], tags: TagIndexing) -> float:
    score = a[tags.start, y[0]] + a[y[-1], tags.end]
    for prev, nxt in zip(y, y[1:]):
        score += a[prev, nxt]
    for t, tag in enumerate(y):
        score += p[t, tag]
    return float(score)


def _guard(steps: int, k: int) -> None:
    if k**steps > BRUTE_FORCE_LIMIT:
        raise GuardError(f"brute force over {k}^{steps} paths exceeds {BRUTE_FORCE_LIMIT}")


def brute_force_partition(emissions, crf: CrfParams) -> float:
    """Exhaustive log-partition; oracle for log_partition."""
    p = _as_array(emissions)
    a = _as_array(crf.transitions)
    steps, k = p.shape
    _guard(steps, k)
    scores = np.array(
        [_path_score_np(p, a, y, crf.tags) for y in product(range(k), repeat=steps)]
    )
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_force_best(emissions, crf: CrfParams) -> tuple[list[int], float]:
    """Exhaustive argmax path; ties resolve to the lexicographically
    smallest path. Oracle for viterbi."""
    p = _as_array(emissions)
    a = _as_array(crf.transitions)
    steps, k = p.shape
    _guard(steps, k)
    best_path: tuple[int, ...] | None = None
    best_score = -np.inf
    for y in product(range(k), repeat=steps):  # lexicographic order
        s = _path_score_np(p, a, y, crf.tags)
        if s > best_score:
            best_score = s
            best_path = y
    assert best_path is not None
    return list(best_path), float(best_score)


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
