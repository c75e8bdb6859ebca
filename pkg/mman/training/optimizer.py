"""Adam with bias correction and the step learning-rate schedule."""
import logging
from dataclasses import dataclass, field

import numpy as np

from mman.config import TrainConfig
from mman.src.module import Parameter

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    """first moment per parameter name"""
    v: dict[str, np.ndarray] = field(default_factory=dict)
    """second moment per parameter name"""
    step: int = 0

    def copy(self) -> "AdamState":
        return AdamState(
            {k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()}, self.step,
        )


def adam_step(
        params: dict[str, Parameter],
        grads: dict[str, np.ndarray | None],
        state: AdamState,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        weight_decay: float = 0.0,
) -> AdamState:
    """one bias-corrected Adam update, in place on `params` and `state`

    Weight decay enters as an extra `weight_decay * theta` gradient term and only for
    parameters flagged with `decay`. A missing gradient counts as zero.

    :param params: name -> Parameter
    :param grads: name -> gradient array (None for a parameter no loss reached)
    """
    if lr <= 0:
        raise ValueError(f"Learning rate must be positive. Got {lr}.")
    state.step += 1
    bias1 = 1.0 - beta1 ** state.step
    bias2 = 1.0 - beta2 ** state.step

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        elif grad.shape != param.shape:
            raise ValueError(f"Gradient for `{name}` has shape {grad.shape}, parameter has {param.shape}.")
        if weight_decay and getattr(param, "decay", False):
            grad = grad + weight_decay * param.data

        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * grad
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (grad * grad)

        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        param.data = (param.data - lr * m_hat / (np.sqrt(v_hat) + epsilon)).astype(param.dtype, copy=False)
    return state


class Adam:
    """Adam over a fixed set of named parameters"""

    def __init__(
            self,
            params: dict[str, Parameter],
            beta1: float = 0.9,
            beta2: float = 0.999,
            epsilon: float = 1e-8,
            weight_decay: float = 0.0,
    ):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.weight_decay = weight_decay
        self.state = AdamState()

    def __repr__(self):
        return f"Adam<params: {len(self.params)}, step: {self.state.step}>"

    @classmethod
    def from_config(cls, params: dict[str, Parameter], config: TrainConfig) -> "Adam":
        return cls(params, config.beta1, config.beta2, config.adam_epsilon, config.weight_decay)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self, lr: float) -> None:
        grads = {name: param.grad for name, param in self.params.items()}
        adam_step(self.params, grads, self.state, lr, self.beta1, self.beta2, self.epsilon, self.weight_decay)


def lr_at(epoch: int, config: TrainConfig) -> float:
    """base rate before `decay_epoch`, a tenth of it from there on"""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"Epoch must lie in [0, {config.epochs}). Got {epoch}.")
    if epoch < config.decay_epoch:
        return config.lr
    return config.lr / 10
