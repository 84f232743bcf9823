"""Registered differentiable operations.

Everything a GRU network needs and nothing more: affine maps, tanh/sigmoid,
stable softmax, max-pooling over time, inverted dropout, embedding lookup,
elementwise arithmetic on equal shapes, and the concat/stack/slice plumbing
that stitches sequence tensors together. No general broadcasting.

Each operation validates shapes up front (raising DimensionError naming the
offending shapes) and registers an exact backward rule on the output node.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError, EmptySequenceError
from .tensor import Tensor, make_node


def _want_vector(t: Tensor, op: str) -> None:
    if t.data.ndim != 1:
        raise DimensionError(f"{op}: expected a vector, got shape {t.data.shape}")


def _want_matrix(t: Tensor, op: str) -> None:
    if t.data.ndim != 2:
        raise DimensionError(f"{op}: expected a matrix, got shape {t.data.shape}")


def affine(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """W @ x + b for a vector x, or row-wise X @ W^T + b for a matrix.

    Backward: dx = g @ W, dW = outer(g, x) (or g^T @ X row-wise), db = g
    (or its row sum).
    """
    _want_matrix(W, "affine")
    m, n = W.data.shape
    if x.data.ndim not in (1, 2) or x.data.shape[-1] != n:
        raise DimensionError(
            f"affine: input shape {x.data.shape} does not conform to weight shape {W.data.shape}"
        )
    if b is not None and b.data.shape != (m,):
        raise DimensionError(
            f"affine: bias shape {b.data.shape} does not conform to weight shape {W.data.shape}"
        )
    out = x.data @ W.data.T
    if b is not None:
        out = out + b.data

    parents = (x, W) if b is None else (x, W, b)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g @ W.data)
        if W.requires_grad:
            if x.data.ndim == 1:
                W.accumulate_grad(np.outer(g, x.data))
            else:
                W.accumulate_grad(g.T @ x.data)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g if x.data.ndim == 1 else g.sum(axis=0))

    return make_node(out, "affine", parents, backward)


def activate(x: Tensor, kind: str) -> Tensor:
    """Elementwise tanh or sigmoid with the exact derivative rule."""
    if kind == "tanh":
        y = np.tanh(x.data)

        def backward(g: np.ndarray) -> None:
            if x.requires_grad:
                x.accumulate_grad(g * (1.0 - y * y))

    elif kind == "sigmoid":
        with np.errstate(over="ignore"):
            y = 1.0 / (1.0 + np.exp(-x.data))

        def backward(g: np.ndarray) -> None:
            if x.requires_grad:
                x.accumulate_grad(g * y * (1.0 - y))

    else:
        raise ConfigError(f"activate: unknown kind {kind!r} (expected 'tanh' or 'sigmoid')")
    return make_node(y, kind, (x,), backward)


def softmax(logits: Tensor) -> Tensor:
    """Stable softmax over a vector, or over each row of a matrix.

    Computed with max-subtraction; outputs are nonnegative and each
    distribution sums to 1 within 1e-12.
    """
    if logits.data.size == 0:
        raise DimensionError(f"softmax: empty input of shape {logits.data.shape}")
    if logits.data.ndim not in (1, 2):
        raise DimensionError(f"softmax: expected 1-D or 2-D input, got shape {logits.data.shape}")
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        if logits.requires_grad:
            inner = (g * y).sum(axis=-1, keepdims=True)
            logits.accumulate_grad(y * (g - inner))

    return make_node(y, "softmax", (logits,), backward)


def maxpool_time(H: Tensor, valid_len: int) -> Tensor:
    """Per-dimension maximum over the first ``valid_len`` rows of H[T, d].

    Rows beyond valid_len never influence the output; backward routes each
    dimension's gradient to its (first) argmax row.
    """
    _want_matrix(H, "maxpool_time")
    T, d = H.data.shape
    if valid_len == 0:
        raise EmptySequenceError("maxpool_time: valid_len is 0 (empty utterance)")
    if not 1 <= valid_len <= T:
        raise DimensionError(f"maxpool_time: valid_len {valid_len} outside 1..{T}")
    window = H.data[:valid_len]
    arg = window.argmax(axis=0)
    cols = np.arange(d)
    out = window[arg, cols]

    def backward(g: np.ndarray) -> None:
        if H.requires_grad:
            gH = np.zeros_like(H.data)
            gH[arg, cols] = g
            H.accumulate_grad(gH)

    return make_node(out, "maxpool_time", (H,), backward)


def dropout(x: Tensor, rate: float, mode: str, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: train mode zeroes entries with probability ``rate``
    and scales survivors by 1/(1-rate); infer mode (and rate 0) is the
    identity — the same node, bitwise."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout: rate {rate} outside [0, 1)")
    if mode not in ("train", "infer"):
        raise ConfigError(f"dropout: unknown mode {mode!r}")
    if mode == "infer" or rate == 0.0:
        return x
    keep = rng.random(x.data.shape) >= rate
    scaled_mask = keep / (1.0 - rate)
    y = x.data * scaled_mask

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g * scaled_mask)

    return make_node(y, "dropout", (x,), backward)


def select_rows(X: Tensor, rows: np.ndarray) -> Tensor:
    """Rows ``X[rows]`` as a [len(rows), d] tensor; this is both embedding
    lookup and loss-row selection.

    Backward scatter-adds straight into the source gradient; duplicate
    indices accumulate.
    """
    _want_matrix(X, "select_rows")
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 1:
        raise DimensionError(f"select_rows: indices must be 1-D, got shape {rows.shape}")
    if rows.size and (rows.min() < 0 or rows.max() >= X.data.shape[0]):
        raise DimensionError(
            f"select_rows: row index outside matrix of {X.data.shape[0]} rows"
        )
    out = X.data[rows]

    def backward(g: np.ndarray) -> None:
        if X.requires_grad:
            if X.grad is None:
                X.grad = np.zeros_like(X.data)
            np.add.at(X.grad, rows, g)

    return make_node(out, "select_rows", (X,), backward)


def _binary(op: str, a: Tensor, b: Tensor, fwd, da, db) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")
    out = fwd(a.data, b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(da(g))
        if b.requires_grad:
            b.accumulate_grad(db(g))

    return make_node(out, op, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary("add", a, b, np.add, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary("sub", a, b, np.subtract, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of equal shapes."""
    return _binary(
        "mul", a, b, np.multiply, lambda g: g * b.data, lambda g: g * a.data
    )


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g * c)

    return make_node(x.data * c, "scale", (x,), backward)


def add_scalar(x: Tensor, c: float) -> Tensor:
    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g)

    return make_node(x.data + c, "add_scalar", (x,), backward)


def log(x: Tensor) -> Tensor:
    """Elementwise natural log; log of a nonpositive entry trips the
    finiteness check and surfaces as a numeric error naming this op."""
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(x.data)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g / x.data)

    return make_node(y, "log", (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all entries as a scalar node."""
    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.data, float(g.reshape(()))))

    return make_node(np.asarray(x.data.sum()), "sum_all", (x,), backward)


def gather_cols(P: Tensor, cols: np.ndarray) -> Tensor:
    """Pick one entry per row: out[i] = P[i, cols[i]]."""
    _want_matrix(P, "gather_cols")
    cols = np.asarray(cols, dtype=np.int64)
    n, k = P.data.shape
    if cols.shape != (n,):
        raise DimensionError(f"gather_cols: need {n} indices, got shape {cols.shape}")
    if cols.size and (cols.min() < 0 or cols.max() >= k):
        raise DimensionError(f"gather_cols: column index outside 0..{k - 1}")
    rows = np.arange(n)
    out = P.data[rows, cols]

    def backward(g: np.ndarray) -> None:
        if P.requires_grad:
            gP = np.zeros_like(P.data)
            gP[rows, cols] = g
            P.accumulate_grad(gP)

    return make_node(out, "gather_cols", (P,), backward)


def concat_vec(parts: list[Tensor]) -> Tensor:
    """Concatenate vectors into one vector; backward splits the gradient."""
    if not parts:
        raise DimensionError("concat_vec: no parts")
    for p in parts:
        _want_vector(p, "concat_vec")
    sizes = [p.data.shape[0] for p in parts]
    out = np.concatenate([p.data for p in parts])
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.accumulate_grad(g[lo:hi])

    return make_node(out, "concat_vec", tuple(parts), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation of two matrices with equal row counts."""
    _want_matrix(a, "concat_cols")
    _want_matrix(b, "concat_cols")
    if a.data.shape[0] != b.data.shape[0]:
        raise DimensionError(
            f"concat_cols: row counts differ, {a.data.shape} vs {b.data.shape}"
        )
    na = a.data.shape[1]
    out = np.hstack([a.data, b.data])

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g[:, :na])
        if b.requires_grad:
            b.accumulate_grad(g[:, na:])

    return make_node(out, "concat_cols", (a, b), backward)


def stack_rows(rows: list[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one per row."""
    if not rows:
        raise EmptySequenceError("stack_rows: no rows")
    for r in rows:
        _want_vector(r, "stack_rows")
    widths = {r.data.shape[0] for r in rows}
    if len(widths) != 1:
        raise DimensionError(f"stack_rows: mixed widths {sorted(widths)}")
    out = np.stack([r.data for r in rows])

    def backward(g: np.ndarray) -> None:
        for i, r in enumerate(rows):
            if r.requires_grad:
                r.accumulate_grad(g[i])

    return make_node(out, "stack_rows", tuple(rows), backward)


def take_rows(X: Tensor, n: int) -> Tensor:
    """First n rows of a matrix; backward pads the gradient back with zeros."""
    _want_matrix(X, "take_rows")
    T = X.data.shape[0]
    if n == 0:
        raise EmptySequenceError("take_rows: zero rows requested")
    if not 1 <= n <= T:
        raise DimensionError(f"take_rows: n {n} outside 1..{T}")
    out = X.data[:n].copy()

    def backward(g: np.ndarray) -> None:
        if X.requires_grad:
            gX = np.zeros_like(X.data)
            gX[:n] = g
            X.accumulate_grad(gX)

    return make_node(out, "take_rows", (X,), backward)


def pad_rows(X: Tensor, total: int) -> Tensor:
    """Append zero rows until the matrix has ``total`` rows."""
    _want_matrix(X, "pad_rows")
    T, d = X.data.shape
    if total < T:
        raise DimensionError(f"pad_rows: total {total} smaller than current {T}")
    out = np.zeros((total, d))
    out[:T] = X.data

    def backward(g: np.ndarray) -> None:
        if X.requires_grad:
            X.accumulate_grad(g[:T])

    return make_node(out, "pad_rows", (X,), backward)


def reverse_rows(X: Tensor) -> Tensor:
    """Reverse the row order of a matrix (time flip for the backward GRU)."""
    _want_matrix(X, "reverse_rows")
    out = X.data[::-1].copy()

    def backward(g: np.ndarray) -> None:
        if X.requires_grad:
            X.accumulate_grad(g[::-1])

    return make_node(out, "reverse_rows", (X,), backward)
