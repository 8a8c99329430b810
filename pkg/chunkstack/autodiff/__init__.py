from chunkstack.autodiff.tensor import Function, Tensor, no_grad, is_grad_enabled, resolve_dtype
from chunkstack.autodiff import functional
from chunkstack.autodiff.gradcheck import GradCheckReport, grad_check

__all__ = [
    "Function",
    "Tensor",
    "no_grad",
    "is_grad_enabled",
    "resolve_dtype",
    "functional",
    "GradCheckReport",
    "grad_check",
]
