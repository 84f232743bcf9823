"""Recurrence kernel selection and the gru_sequence graph node.

Two interchangeable implementations of the serial GRU loop exist: a
compiled extension (_recurrence, built from Cython at install time) and a
pure-numpy fallback (recurrence_numpy). Selection happens once at import:

  CONVAFFECT_BACKEND=compiled   require the extension, fail loudly if absent
  CONVAFFECT_BACKEND=python     force the fallback
  unset                         prefer compiled, silently fall back

Both run the same arithmetic in the same order and agree to within
floating-point rounding of the transcendentals; any single run is exactly
reproducible under a fixed backend.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError, DimensionError
from . import recurrence_numpy
from .tensor import Tensor, make_node

_ENV_VAR = "CONVAFFECT_BACKEND"


def _load_compiled():
    from . import _recurrence  # noqa: PLC0415  (deferred: may not be built)

    return _recurrence


def _select():
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "python":
        return recurrence_numpy, "python"
    if choice == "compiled":
        try:
            return _load_compiled(), "compiled"
        except ImportError as exc:
            raise ConfigError(
                f"{_ENV_VAR}=compiled but the extension is not built: {exc}"
            ) from exc
    if choice:
        raise ConfigError(
            f"{_ENV_VAR}={choice!r} not recognized (expected 'compiled' or 'python')"
        )
    try:
        return _load_compiled(), "compiled"
    except ImportError:
        return recurrence_numpy, "python"


_impl, BACKEND = _select()
gru_recurrence_forward = _impl.gru_recurrence_forward
gru_recurrence_backward = _impl.gru_recurrence_backward


def backend_module(name: str):
    """Fetch a kernel module by name; used by tests and the benchmark to
    compare implementations side by side."""
    if name == "python":
        return recurrence_numpy
    if name == "compiled":
        return _load_compiled()
    raise ConfigError(f"unknown backend {name!r}")


def _contig(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def gru_sequence(
    X: Tensor,
    h0: Tensor,
    Wz: Tensor, Uz: Tensor, bz: Tensor,
    Wr: Tensor, Ur: Tensor, br: Tensor,
    Wh: Tensor, Uh: Tensor, bh: Tensor,
) -> Tensor:
    """Unidirectional GRU over X[T, n], returning all hidden states H[T, d].

    h_t = (1 - z_t) * h_{t-1} + z_t * hbar_t with
      z_t    = sigmoid(Wz x_t + Uz h_{t-1} + bz)
      r_t    = sigmoid(Wr x_t + Ur h_{t-1} + br)
      hbar_t = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)

    Input-side products are batched over time outside the kernel; the serial
    recurrence runs in the selected backend. Backward replays the loop in
    reverse from the saved gate values and batches the parameter gradients.
    """
    if X.data.ndim != 2:
        raise DimensionError(f"gru_sequence: expected X[T, n], got shape {X.data.shape}")
    T, n = X.data.shape
    d = h0.data.shape[0]
    for name, M in (("Wz", Wz), ("Wr", Wr), ("Wh", Wh)):
        if M.data.shape != (d, n):
            raise DimensionError(
                f"gru_sequence: {name} shape {M.data.shape} does not match ({d}, {n})"
            )
    for name, M in (("Uz", Uz), ("Ur", Ur), ("Uh", Uh)):
        if M.data.shape != (d, d):
            raise DimensionError(
                f"gru_sequence: {name} shape {M.data.shape} does not match ({d}, {d})"
            )
    for name, v in (("bz", bz), ("br", br), ("bh", bh), ("h0", h0)):
        if v.data.shape != (d,):
            raise DimensionError(
                f"gru_sequence: {name} shape {v.data.shape} does not match ({d},)"
            )

    AX = np.empty((T, 3 * d))
    AX[:, :d] = X.data @ Wz.data.T + bz.data
    AX[:, d : 2 * d] = X.data @ Wr.data.T + br.data
    AX[:, 2 * d :] = X.data @ Wh.data.T + bh.data

    cUz, cUr, cUh = _contig(Uz.data), _contig(Ur.data), _contig(Uh.data)
    H, Z, R, HB = gru_recurrence_forward(AX, _contig(h0.data), cUz, cUr, cUh)

    parents = (X, h0, Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh)

    def backward(dH: np.ndarray) -> None:
        dA, dh0 = gru_recurrence_backward(
            cUz, cUr, cUh, _contig(h0.data), H, Z, R, HB, _contig(dH)
        )
        dAz, dAr, dAh = dA[:, :d], dA[:, d : 2 * d], dA[:, 2 * d :]
        # rows of previous hidden states aligned with each step
        Hprev = np.vstack([h0.data[None, :], H[:-1]])
        if X.requires_grad:
            X.accumulate_grad(dAz @ Wz.data + dAr @ Wr.data + dAh @ Wh.data)
        if h0.requires_grad:
            h0.accumulate_grad(dh0)
        if Wz.requires_grad:
            Wz.accumulate_grad(dAz.T @ X.data)
        if Wr.requires_grad:
            Wr.accumulate_grad(dAr.T @ X.data)
        if Wh.requires_grad:
            Wh.accumulate_grad(dAh.T @ X.data)
        if Uz.requires_grad:
            Uz.accumulate_grad(dAz.T @ Hprev)
        if Ur.requires_grad:
            Ur.accumulate_grad(dAr.T @ Hprev)
        if Uh.requires_grad:
            Uh.accumulate_grad(dAh.T @ (R * Hprev))
        if bz.requires_grad:
            bz.accumulate_grad(dAz.sum(axis=0))
        if br.requires_grad:
            br.accumulate_grad(dAr.sum(axis=0))
        if bh.requires_grad:
            bh.accumulate_grad(dAh.sum(axis=0))

    return make_node(H, "gru_sequence", parents, backward)
