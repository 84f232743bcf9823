"""Central-difference gradient checking.

Used by the test suite to validate every backward rule against a numeric
estimate. Relative error is measured as |analytic - numeric| / max(1,
|analytic|, |numeric|) per coordinate, so tiny gradients are compared
absolutely and large ones relatively.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numeric_grad(
    f: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    which: int,
    eps: float = 1e-6,
) -> np.ndarray:
    """Central differences of f with respect to arrays[which].

    f must map concrete numpy arrays to a float and be deterministic
    (stochastic ops need their rng reseeded inside f on every call).
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    target = arrays[which]
    g = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = target[idx]
        target[idx] = orig + eps
        hi = f(arrays)
        target[idx] = orig - eps
        lo = f(arrays)
        target[idx] = orig
        g[idx] = (hi - lo) / (2.0 * eps)
        it.iternext()
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max())


def check_gradients(
    build: Callable[[Sequence[Tensor]], Tensor],
    arrays: Sequence[np.ndarray],
    eps: float = 1e-6,
    tol: float = 1e-5,
) -> float:
    """Compare autodiff gradients of a scalar-valued graph against central
    differences for every input; returns the worst relative error.

    ``build`` receives freshly wrapped leaf tensors and must return a scalar
    Tensor. Raises AssertionError beyond ``tol`` naming the offending input.
    """
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    out = build(leaves)
    out.backward()

    def as_scalar(concrete: Sequence[np.ndarray]) -> float:
        fresh = [Tensor(a) for a in concrete]
        return build(fresh).item()

    worst = 0.0
    for i, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        numeric = numeric_grad(as_scalar, arrays, i, eps=eps)
        err = max_rel_error(analytic, numeric)
        worst = max(worst, err)
        if err > tol:
            raise AssertionError(
                f"gradient mismatch on input {i}: max rel error {err:.3e} > {tol:.0e}"
            )
    return worst
