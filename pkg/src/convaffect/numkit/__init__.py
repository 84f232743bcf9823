"""Dense float64 tensors with reverse-mode autodiff, sized for this model.

The public surface is the Tensor node, the op builders in ops, the
gru_sequence kernel wrapper in kernels, and the finite-difference checker
in gradcheck.
"""

from .tensor import Tensor, as_tensor
from . import ops
from .kernels import BACKEND, gru_sequence
from .gradcheck import check_gradients

__all__ = ["Tensor", "as_tensor", "ops", "BACKEND", "gru_sequence", "check_gradients"]
