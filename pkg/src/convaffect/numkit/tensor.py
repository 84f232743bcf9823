"""Dense float64 tensors with reverse-mode differentiation.

A Tensor is a node in the computation graph: it carries a value, a lazily
materialized gradient of the same shape, and its provenance (the producing
operation plus parent nodes and a backward closure). Leaves have no parents.
Gradients accumulate by summation when a node feeds several consumers, which
is what shared GRU weights across timesteps require.

Every operation checks its output for NaN/Inf and fails fast naming the
offending operation; non-finite values never propagate past an op boundary.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from ..errors import ContractError, NumericError


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by operation '{op}'")


class Tensor:
    """Graph node: value + gradient + provenance.

    ``data`` is a row-major float64 ndarray. ``grad`` stays None until the
    backward pass (or an accumulation) materializes it; once materialized it
    always has the same shape as ``data``. ``parents`` and the backward
    closure record how the node was produced; the graph is acyclic by
    construction (nodes only reference previously created nodes).
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        op: str = "leaf",
        parents: tuple = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, op)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self.op = op
        self.parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def accumulate_grad(self, g: np.ndarray) -> None:
        """Add an incoming gradient contribution (materializing on first use)."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode pass seeding d(self)/d(self) = 1.

        Only valid on scalar-valued nodes (size 1); gradients of every node
        reachable through the provenance graph are accumulated into ``grad``.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar node, got shape {self.data.shape}"
            )
        order = self._topo_order()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _topo_order(self) -> list[Tensor]:
        # Iterative DFS: dialogue graphs can hold tens of thousands of nodes,
        # which would overflow Python's recursion limit.
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        return order

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on non-scalar tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


def as_tensor(value, requires_grad: bool = False) -> Tensor:
    """Coerce an array-like (or pass through a Tensor) to a graph leaf."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=requires_grad)


def make_node(
    data: np.ndarray,
    op: str,
    parents: Iterable[Tensor],
    backward: Callable[[np.ndarray], None],
) -> Tensor:
    """Create an operation-result node, skipping backward wiring when no
    parent tracks gradients."""
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, op=op, parents=parents, backward=backward)
    return Tensor(data, op=op)
