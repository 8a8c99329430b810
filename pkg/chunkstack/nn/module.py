from typing import Dict, Iterator, List, Tuple

import numpy as np

from chunkstack.autodiff.tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, data: np.ndarray, dtype=None):
        super().__init__(data, dtype=dtype, requires_grad=True)


def normal_init(
    rng: np.random.Generator, shape: Tuple[int, ...], std: float, dtype
) -> Parameter:
    return Parameter(rng.normal(0.0, std, size=shape), dtype=dtype)


def zeros_init(shape: Tuple[int, ...], dtype) -> Parameter:
    return Parameter(np.zeros(shape), dtype=dtype)


def ones_init(shape: Tuple[int, ...], dtype) -> Parameter:
    return Parameter(np.ones(shape), dtype=dtype)


class Module:
    """
    Container of parameters and sub-modules.

    Parameters and sub-modules are discovered from instance attributes in
    assignment order, so ``named_parameters`` is deterministic and names are
    stable dotted paths (``layers.0.attention.query.weight``).
    """

    training: bool = False

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{path}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(prefix=f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ValueError(f"State mismatch: missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            array = np.asarray(state[name])
            if array.shape != p.shape:
                raise ValueError(f"Shape mismatch for {name}: {array.shape} vs {p.shape}")
            p.data = array.astype(p.dtype, copy=True)

    def train(self, mode: bool = True) -> "Module":
        for module in self._modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def _modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value._modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item._modules()
