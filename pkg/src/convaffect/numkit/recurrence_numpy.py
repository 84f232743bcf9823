"""Pure-numpy GRU recurrence kernel.

The input-side GEMMs (X @ W^T + b for all three gates, and the weight
gradients after backward) are batched over time by the caller; only the
serial per-timestep part lives here. The compiled extension in
_recurrence.pyx implements the same two functions with the same signatures.

Gate layout inside AX and dA is [update | reset | candidate], d columns each.

Update gate convention: h_t = (1 - z_t) * h_{t-1} + z_t * hbar_t, i.e. z
gates the candidate in, not the carry.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(a: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-a))


def gru_recurrence_forward(
    AX: np.ndarray,
    h0: np.ndarray,
    Uz: np.ndarray,
    Ur: np.ndarray,
    Uh: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Run T GRU steps given precomputed input activations AX[T, 3d].

    Returns (H, Z, R, HB): hidden states and the gate/candidate values
    needed to replay the step in backward.
    """
    T = AX.shape[0]
    d = h0.shape[0]
    H = np.empty((T, d))
    Z = np.empty((T, d))
    R = np.empty((T, d))
    HB = np.empty((T, d))
    h = h0
    for t in range(T):
        z = _sigmoid(AX[t, :d] + Uz @ h)
        r = _sigmoid(AX[t, d : 2 * d] + Ur @ h)
        hb = np.tanh(AX[t, 2 * d :] + Uh @ (r * h))
        h = (1.0 - z) * h + z * hb
        Z[t] = z
        R[t] = r
        HB[t] = hb
        H[t] = h
    return H, Z, R, HB


def gru_recurrence_backward(
    Uz: np.ndarray,
    Ur: np.ndarray,
    Uh: np.ndarray,
    h0: np.ndarray,
    H: np.ndarray,
    Z: np.ndarray,
    R: np.ndarray,
    HB: np.ndarray,
    dH: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagate through the recurrence.

    dH[t] is the loss gradient arriving at h_t from outside the recurrence.
    Returns (dA, dh0) where dA[t] holds the gradients of the three
    pre-activation gate vectors; the caller turns dA into weight, bias and
    input gradients with batched GEMMs.
    """
    T, d = H.shape
    dA = np.empty((T, 3 * d))
    carry = np.zeros(d)
    for t in range(T - 1, -1, -1):
        h_prev = H[t - 1] if t > 0 else h0
        dh = dH[t] + carry
        z = Z[t]
        r = R[t]
        hb = HB[t]
        dz = dh * (hb - h_prev)
        dhb = dh * z
        carry = dh * (1.0 - z)
        dah = dhb * (1.0 - hb * hb)
        drh = Uh.T @ dah
        carry = carry + drh * r
        dr = drh * h_prev
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        carry = carry + Uz.T @ daz + Ur.T @ dar
        dA[t, :d] = daz
        dA[t, d : 2 * d] = dar
        dA[t, 2 * d :] = dah
    return dA, carry
