"""Dense fp64 tensors with reverse-mode automatic differentiation.

Operations eagerly record a DAG of ``Tensor`` nodes. Calling ``backward()``
on a scalar walks the graph once in reverse topological order. Leaf tensors
with ``requires_grad=True`` (normally ``Parameter``) accumulate gradients
across backward calls until ``zero_grad``, which is what per-batch gradient
accumulation in the training loop relies on.

All arithmetic is float64; the finite-difference tolerances in the test
suite depend on that.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConsistencyError

Array = np.ndarray

_MASK64 = (1 << 64) - 1


class Tensor:
    """A node in the autodiff graph.

    ``data`` is always a float64 ndarray (possibly 0-d for scalars).
    ``_parents``/``_backward`` are the graph edges; they are part of the
    internal op-definition contract, used by the fused ops in other modules.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple = (),
        _backward: Callable | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad[...] = 0.0

    def backward(self, seed: float = 1.0) -> None:
        """Backpropagate ``seed`` (d out / d out) through the graph.

        ``seed`` other than 1.0 scales every gradient, which the training
        loop uses to average per-sentence gradients over a batch.
        """
        topo = _toposort(self)
        grads: dict[int, Array] = {id(self): np.full(self.data.shape, seed)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is not None:
                node._backward(g, grads)
            elif node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g

    # Operator sugar; the named functions below do the work.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named trainable leaf; its grad buffer persists across backward calls."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative DFS: recursion would overflow on long LSTM chains.
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return topo


def accumulate(grads: dict[int, Array], t: Tensor, g: Array) -> None:
    """Add ``g`` into the transient gradient slot for ``t``.

    Copies on first insert so later in-place ``+=`` cannot corrupt an array
    shared with another node (e.g. add() hands the same array to both
    parents).
    """
    key = id(t)
    if key in grads:
        grads[key] += g
    else:
        grads[key] = np.array(g)


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Reduce a broadcast gradient back to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# Elementwise and linear-algebra ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g, grads):
        accumulate(grads, a, _unbroadcast(g, a.data.shape))
        accumulate(grads, b, _unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward(g, grads):
        accumulate(grads, a, _unbroadcast(g, a.data.shape))
        accumulate(grads, b, _unbroadcast(-g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g, grads):
        accumulate(grads, a, _unbroadcast(g * b.data, a.data.shape))
        accumulate(grads, b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def neg(a: Tensor) -> Tensor:
    def backward(g, grads):
        accumulate(grads, a, -g)

    return Tensor(-a.data, _parents=(a,), _backward=backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 2-D x 2-D and 2-D x 1-D operands.

    Gradient contract: dL/da = dL/dout . b^T, dL/db = a^T . dL/dout.
    """
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ValueError(
            f"matmul expects 2-D x (1|2)-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    if b.data.ndim == 2:

        def backward(g, grads):
            accumulate(grads, a, g @ b.data.T)
            accumulate(grads, b, a.data.T @ g)

    else:

        def backward(g, grads):
            accumulate(grads, a, np.outer(g, b.data))
            accumulate(grads, b, a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign to avoid overflow in exp.
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g, grads):
        accumulate(grads, a, g * out_data * (1.0 - out_data))

    return Tensor(out_data, _parents=(a,), _backward=backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g, grads):
        accumulate(grads, a, g * (1.0 - out_data * out_data))

    return Tensor(out_data, _parents=(a,), _backward=backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g, grads):
        accumulate(grads, a, g * out_data)

    return Tensor(out_data, _parents=(a,), _backward=backward)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def backward(g, grads):
        accumulate(grads, a, g / a.data)

    return Tensor(out_data, _parents=(a,), _backward=backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(g, grads):
        accumulate(grads, a, np.full(a.data.shape, float(g)))

    return Tensor(a.data.sum(), _parents=(a,), _backward=backward)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g, grads):
        accumulate(grads, a, np.full(a.data.shape, float(g) / n))

    return Tensor(a.data.mean(), _parents=(a,), _backward=backward)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------


def transpose(a: Tensor) -> Tensor:
    def backward(g, grads):
        accumulate(grads, a, g.T)

    return Tensor(a.data.T, _parents=(a,), _backward=backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.data.shape

    def backward(g, grads):
        accumulate(grads, a, g.reshape(old))

    return Tensor(a.data.reshape(shape), _parents=(a,), _backward=backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g, grads):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            accumulate(grads, t, g[tuple(idx)])

    return Tensor(out_data, _parents=tuple(tensors), _backward=backward)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix, one per row."""
    out_data = np.stack([t.data for t in tensors], axis=0)

    def backward(g, grads):
        for i, t in enumerate(tensors):
            accumulate(grads, t, g[i])

    return Tensor(out_data, _parents=tuple(tensors), _backward=backward)


def narrow(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice along axis 0."""

    def backward(g, grads):
        z = np.zeros_like(a.data)
        z[start:stop] = g
        accumulate(grads, a, z)

    return Tensor(a.data[start:stop], _parents=(a,), _backward=backward)


def row(a: Tensor, i: int) -> Tensor:
    """Row ``i`` of a matrix as a 1-D tensor."""

    def backward(g, grads):
        z = np.zeros_like(a.data)
        z[i] = g
        accumulate(grads, a, z)

    return Tensor(a.data[i], _parents=(a,), _backward=backward)


def col(a: Tensor, j: int) -> Tensor:
    """Column ``j`` of a matrix as a 1-D tensor."""

    def backward(g, grads):
        z = np.zeros_like(a.data)
        z[:, j] = g
        accumulate(grads, a, z)

    return Tensor(a.data[:, j], _parents=(a,), _backward=backward)


def slice2d(a: Tensor, r0: int, r1: int, c0: int, c1: int) -> Tensor:
    def backward(g, grads):
        z = np.zeros_like(a.data)
        z[r0:r1, c0:c1] = g
        accumulate(grads, a, z)

    return Tensor(a.data[r0:r1, c0:c1], _parents=(a,), _backward=backward)


def broadcast_row(v: Tensor, n: int) -> Tensor:
    """Repeat a 1-D tensor as ``n`` identical matrix rows."""
    out_data = np.tile(v.data, (n, 1))

    def backward(g, grads):
        accumulate(grads, v, g.sum(axis=0))

    return Tensor(out_data, _parents=(v,), _backward=backward)


# ---------------------------------------------------------------------------
# Reductions with stabilized exponentials
# ---------------------------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis`` (max-subtraction before exp)."""
    if a.data.size == 0:
        raise ValueError("softmax of an empty tensor")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g, grads):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        accumulate(grads, a, (g - dot) * out_data)

    return Tensor(out_data, _parents=(a,), _backward=backward)


def logsumexp(a: Tensor, axis: int | None = None) -> Tensor:
    """log(sum(exp(a))) along ``axis`` (or over everything), max-shifted."""
    if a.data.size == 0:
        raise ValueError("logsumexp of an empty tensor")
    m = a.data.max(axis=axis, keepdims=True)
    out_keep = m + np.log(np.exp(a.data - m).sum(axis=axis, keepdims=True))
    out_data = np.squeeze(out_keep, axis=axis) if axis is not None else out_keep.reshape(())

    def backward(g, grads):
        w = np.exp(a.data - out_keep)  # softmax weights
        if axis is None:
            accumulate(grads, a, float(g) * w)
        else:
            accumulate(grads, a, np.expand_dims(g, axis) * w)

    return Tensor(out_data, _parents=(a,), _backward=backward)


def max_pool_over_time(h: Tensor) -> Tensor:
    """Column-wise max of a (T, m) matrix.

    Gradient routes to the first (lowest t) maximum in each column, so the
    op is deterministic under ties.
    """
    if h.data.ndim != 2 or h.data.shape[0] < 1:
        raise ValueError(f"max_pool_over_time expects a non-empty (T, m) matrix, got {h.data.shape}")
    argmax = h.data.argmax(axis=0)  # first occurrence on ties
    out_data = h.data[argmax, np.arange(h.data.shape[1])]

    def backward(g, grads):
        z = np.zeros_like(h.data)
        z[argmax, np.arange(h.data.shape[1])] = g
        accumulate(grads, h, z)

    return Tensor(out_data, _parents=(h,), _backward=backward)


def cross_entropy_logits(logits: Tensor, targets) -> Tensor:
    """Softmax cross-entropy straight from logits.

    1-D logits with an int target give -log p[target]; a (T, k) matrix with
    a length-T target vector gives the mean over rows.
    """
    z = logits.data
    if z.ndim == 1:
        t = int(targets)
        lse = _lse_np(z)
        out_data = lse - z[t]

        def backward(g, grads):
            p = np.exp(z - lse)
            p[t] -= 1.0
            accumulate(grads, logits, float(g) * p)

    elif z.ndim == 2:
        idx = np.asarray(targets, dtype=np.intp)
        if idx.shape[0] != z.shape[0]:
            raise ValueError(f"targets length {idx.shape[0]} != rows {z.shape[0]}")
        m = z.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
        out_data = float((lse - z[np.arange(z.shape[0]), idx]).mean())

        def backward(g, grads):
            p = np.exp(z - lse[:, None])
            p[np.arange(z.shape[0]), idx] -= 1.0
            accumulate(grads, logits, (float(g) / z.shape[0]) * p)

    else:
        raise ValueError(f"cross_entropy_logits expects 1-D or 2-D logits, got {z.shape}")
    return Tensor(out_data, _parents=(logits,), _backward=backward)


def _lse_np(v: Array) -> float:
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Prng:
    """Seeded random stream (PCG64). Identical seed, identical stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def fork(self, salt: int) -> "Prng":
        """Derive an independent stream; used to decouple init/dropout/sampling."""
        return Prng(_splitmix64(self.seed ^ _splitmix64(salt & _MASK64)))

    def normal(self, shape, mean: float = 0.0, std: float = 1.0) -> Array:
        return self._gen.normal(mean, std, size=shape)

    def uniform(self, shape, low: float, high: float) -> Array:
        return self._gen.uniform(low, high, size=shape)

    def random(self, shape) -> Array:
        return self._gen.random(size=shape)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> Array:
        return self._gen.permutation(n)

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), returned sorted."""
        return sorted(self._gen.choice(n, size=k, replace=False).tolist())


def dropout_mask(shape, rate: float, rng: Prng, training: bool) -> Tensor:
    """Inverted-dropout keep mask: Bernoulli(1-rate) scaled by 1/(1-rate).

    At inference (``training=False``) the mask is all ones, keeping the
    prediction path deterministic.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return Tensor(np.ones(shape))
    keep = (rng.random(shape) >= rate).astype(np.float64)
    return Tensor(keep / (1.0 - rate))


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def glorot_uniform(shape: tuple[int, int], rng: Prng) -> Array:
    fan_out, fan_in = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -limit, limit)


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------


def gradient_check_report(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Parameter],
    eps: float = 1e-5,
) -> dict[str, float]:
    """Max relative error between analytic and central-difference gradients,
    per parameter.

    ``loss_fn`` must be deterministic (dropout disabled); it is called twice
    up front and a mismatch raises ``ConsistencyError``.
    """
    params = list(params)
    v1 = loss_fn().item()
    v2 = loss_fn().item()
    if v1 != v2:
        raise ConsistencyError(f"loss_fn is not deterministic: {v1!r} != {v2!r}")

    for p in params:
        p.zero_grad()
    loss_fn().backward()
    analytic = [p.grad.copy() for p in params]

    report: dict[str, float] = {}
    for p, ga in zip(params, analytic):
        worst = 0.0
        flat = p.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_fn().item()
            flat[i] = orig - eps
            f_minus = loss_fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(ga_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(ga_flat[i] - numeric) / denom)
        report[p.name] = worst
    return report


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Parameter],
    eps: float = 1e-5,
) -> float:
    """Worst relative error over all parameter entries (see the report variant)."""
    report = gradient_check_report(loss_fn, params, eps)
    return max(report.values()) if report else 0.0
