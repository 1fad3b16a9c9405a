"""LSTM cell and bidirectional encoder.

One step computes i = sigmoid(Wi x + Ui h + bi), f and o likewise,
g = tanh(Wg x + Ug h + bg), c = f*c_prev + i*g, h = o*tanh(c). The
sequence encoder batches the input-side products over all time steps;
because each output entry is the same row-by-column dot product, a T=1
sequence is bit-identical to a single cell step.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Parameter,
    Prng,
    Tensor,
    add,
    col,
    concat,
    glorot_uniform,
    matmul,
    mul,
    narrow,
    sigmoid,
    stack_rows,
    tanh,
    transpose,
)

GATES = ("i", "f", "o", "g")


class LstmParams:
    """Per-gate weight matrices W (H, d), U (H, H) and bias b (H,).

    Biases start at zero except the forget gate, which starts at 1.0 to
    keep early memory retention high.
    """

    def __init__(self, input_dim: int, hidden: int, rng: Prng, prefix: str):
        self.input_dim = input_dim
        self.hidden = hidden
        self.w: dict[str, Parameter] = {}
        self.u: dict[str, Parameter] = {}
        self.b: dict[str, Parameter] = {}
        for gate in GATES:
            self.w[gate] = Parameter(glorot_uniform((hidden, input_dim), rng), f"{prefix}.w_{gate}")
            self.u[gate] = Parameter(glorot_uniform((hidden, hidden), rng), f"{prefix}.u_{gate}")
            bias = np.ones(hidden) if gate == "f" else np.zeros(hidden)
            self.b[gate] = Parameter(bias, f"{prefix}.b_{gate}")

    def parameters(self) -> list[Parameter]:
        out = []
        for gate in GATES:
            out.extend([self.w[gate], self.u[gate], self.b[gate]])
        return out


class BiLstmParams:
    def __init__(self, input_dim: int, hidden: int, rng: Prng, prefix: str = "bilstm"):
        self.hidden = hidden
        self.forward = LstmParams(input_dim, hidden, rng, f"{prefix}.fwd")
        self.backward = LstmParams(input_dim, hidden, rng, f"{prefix}.bwd")

    def parameters(self) -> list[Parameter]:
        return self.forward.parameters() + self.backward.parameters()


def lstm_cell(
    x_t: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmParams
) -> tuple[Tensor, Tensor]:
    """One recurrence step; returns (h_t, c_t)."""
    i = sigmoid(add(add(matmul(p.w["i"], x_t), matmul(p.u["i"], h_prev)), p.b["i"]))
    f = sigmoid(add(add(matmul(p.w["f"], x_t), matmul(p.u["f"], h_prev)), p.b["f"]))
    o = sigmoid(add(add(matmul(p.w["o"], x_t), matmul(p.u["o"], h_prev)), p.b["o"]))
    g = tanh(add(add(matmul(p.w["g"], x_t), matmul(p.u["g"], h_prev)), p.b["g"]))
    c_t = add(mul(f, c_prev), mul(i, g))
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


def lstm_forward(x: Tensor, p: LstmParams, reverse: bool = False) -> Tensor:
    """Run the cell over a (T, d) input; returns (T, H) hidden states.

    Initial h and c are zero. With ``reverse`` the recurrence runs from the
    last token to the first, and each output is placed back at its original
    row.
    """
    if x.data.ndim != 2 or x.data.shape[0] < 1:
        raise ValueError(f"lstm_forward expects a non-empty (T, d) input, got {x.data.shape}")
    steps = x.data.shape[0]
    hidden = p.hidden

    # Input-side products for all steps at once: (4H, T) = W_cat @ x^T + b_cat.
    w_cat = concat([p.w[g] for g in GATES], axis=0)
    u_cat = concat([p.u[g] for g in GATES], axis=0)
    b_cat = concat([p.b[g] for g in GATES], axis=0)
    pre_x = matmul(w_cat, transpose(x))

    h_t = Tensor(np.zeros(hidden))
    c_t = Tensor(np.zeros(hidden))
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    outputs: list[Tensor | None] = [None] * steps
    for t in order:
        pre = add(add(col(pre_x, t), matmul(u_cat, h_t)), b_cat)
        i = sigmoid(narrow(pre, 0, hidden))
        f = sigmoid(narrow(pre, hidden, 2 * hidden))
        o = sigmoid(narrow(pre, 2 * hidden, 3 * hidden))
        g = tanh(narrow(pre, 3 * hidden, 4 * hidden))
        c_t = add(mul(f, c_t), mul(i, g))
        h_t = mul(o, tanh(c_t))
        outputs[t] = h_t
    return stack_rows(outputs)


def bilstm_forward(x: Tensor, p: BiLstmParams) -> Tensor:
    """(T, 2H) concatenation of the forward and backward passes, forward
    half first."""
    fwd = lstm_forward(x, p.forward, reverse=False)
    bwd = lstm_forward(x, p.backward, reverse=True)
    return concat([fwd, bwd], axis=1)
