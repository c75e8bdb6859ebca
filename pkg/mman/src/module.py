"""Parameter containers realized from LayerStacks."""
from typing import Iterator, TypeVar

import numpy as np

from mman.src import ops
from mman.src.layers import LayerSpec, LayerStack
from mman.src.tensor import Tensor


class Parameter(Tensor):
    """a leaf tensor that requires grad; `decay` marks tensors that get weight decay"""

    def __init__(self, data: np.ndarray, *, decay: bool = False, name: str | None = None):
        super().__init__(data, requires_grad=True, name=name)
        self.decay = decay


class Module:
    def __init__(self):
        self.training: bool = True
        self._parameters: dict[str, Parameter] = {}
        self._children: dict[str, Module] = {}

    def __setattr__(self, key, value):
        if isinstance(value, Parameter):
            self.__dict__.setdefault("_parameters", {})[key] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_children", {})[key] = value
        super().__setattr__(key, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError(f"{type(self).__name__} has no forward()")

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, param in self._parameters.items():
            yield f"{prefix}{name}", param
        for name, child in self._children.items():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        """brute-force count over allocated tensors"""
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: param.data for name, param in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = [name for name in own if name not in state]
        unexpected = [name for name in state if name not in own]
        if missing or unexpected:
            raise KeyError(f"State does not match the module. Missing: {missing}. Unexpected: {unexpected}.")
        for name, param in own.items():
            if state[name].shape != param.shape:
                raise ValueError(f"Parameter `{name}` expects shape {param.shape}. Got {state[name].shape}.")
            param.data = np.array(state[name], dtype=param.dtype)

    def astype(self, dtype) -> "Module":
        for param in self.parameters():
            param.data = param.data.astype(dtype)
        return self


ModuleType = TypeVar('ModuleType', bound=Module)
"""Object type Module"""


def _gaussian(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class Conv2d(Module):
    def __init__(self, spec: LayerSpec, rng: np.random.Generator, init_std: float):
        super().__init__()
        self.spec = spec
        shape = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
        self.weight = Parameter(_gaussian(rng, shape, init_std), decay=True)
        if spec.bias:
            self.bias = Parameter(np.zeros(spec.out_channels))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(
            x, self.weight, self._parameters.get("bias"), self.spec.stride, self.spec.padding, self.spec.dilation
        )


class Deconv2d(Module):
    def __init__(self, spec: LayerSpec, rng: np.random.Generator, init_std: float):
        super().__init__()
        self.spec = spec
        shape = (spec.in_channels, spec.out_channels, spec.kernel, spec.kernel)
        self.weight = Parameter(_gaussian(rng, shape, init_std), decay=True)
        if spec.bias:
            self.bias = Parameter(np.zeros(spec.out_channels))

    def forward(self, x: Tensor) -> Tensor:
        return ops.deconv2d(x, self.weight, self._parameters.get("bias"), self.spec.stride, self.spec.padding)


class InstanceNorm2d(Module):
    def __init__(self, channels: int, epsilon: float = 1e-5):
        super().__init__()
        self.epsilon = epsilon
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))

    def forward(self, x: Tensor) -> Tensor:
        return ops.instance_norm(x, self.gamma, self.beta, self.epsilon)


class Activation(Module):
    def __init__(self, kind: str, slope: float = 0.2):
        super().__init__()
        self.kind = kind
        self.slope = slope

    def forward(self, x: Tensor) -> Tensor:
        return ops.activation(x, self.kind, self.slope)


class Dropout(Module):
    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        self.rate = rate
        self.rng = rng
        """shared stream owned by the enclosing model, checkpointed with it"""

    def forward(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.rate, self.training, self.rng)


class Sequential(Module):
    def __init__(self, *modules: Module):
        super().__init__()
        self._order: list[str] = []
        for i, module in enumerate(modules):
            setattr(self, str(i), module)
            self._order.append(str(i))

    def __len__(self):
        return len(self._order)

    def __getitem__(self, index: int) -> Module:
        return self._children[self._order[index]]

    def forward(self, x: Tensor) -> Tensor:
        for name in self._order:
            x = self._children[name](x)
        return x

    @classmethod
    def from_stack(
            cls,
            stack: LayerStack,
            rng: np.random.Generator,
            *,
            init_std: float = 0.001,
            dropout_rng: np.random.Generator | None = None,
    ) -> "Sequential":
        """allocates parameters for every layer of a linear stack

        :param rng: stream used for weight initialization
        :param init_std: standard deviation of the Gaussian weight init
        :param dropout_rng: stream the dropout layers draw their masks from
        """
        modules: list[Module] = []
        for layer in stack.layers:
            match layer.kind:
                case "conv":
                    modules.append(Conv2d(layer, rng, init_std))
                case "deconv":
                    modules.append(Deconv2d(layer, rng, init_std))
                case "instance_norm":
                    modules.append(InstanceNorm2d(layer.out_channels))
                case "leaky_relu":
                    modules.append(Activation("leaky_relu"))
                case "sigmoid" | "softmax":
                    modules.append(Activation(layer.kind))
                case "dropout":
                    if dropout_rng is None:
                        raise ValueError(f"`{stack.name}` has a dropout layer but no dropout rng was given.")
                    modules.append(Dropout(layer.rate, dropout_rng))
                case "concat_marker":
                    raise ValueError(f"`{stack.name}` has a skip connection; realize it inside the model instead.")
        return cls(*modules)
