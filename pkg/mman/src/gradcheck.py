"""Central finite-difference verification of analytic gradients."""
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from mman.src.tensor import Tensor

FD_FLOOR = 1e-4
"""denominator floor of the relative error, keeps near-zero gradients from dominating"""


@dataclass(frozen=True)
class GradCheckReport:
    op: str
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = FD_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor)"""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(
        op: str,
        fn: Callable[..., Tensor],
        inputs: Sequence[np.ndarray],
        *,
        step: float = 1e-5,
        tolerance: float = 1e-4,
) -> GradCheckReport:
    """compares backward() against central differences for every element of every input

    :param op: name reported back in the GradCheckReport
    :param fn: takes one Tensor per input array and returns a scalar Tensor
    :param inputs: float64 arrays; they are not modified
    :param step: finite-difference step
    :param tolerance: pass threshold on the max relative error
    :return: GradCheckReport with the worst relative error over all elements
    """
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = fn(*tensors)
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def evaluate(values: list[np.ndarray]) -> float:
        return fn(*(Tensor(v) for v in values)).item()

    worst = 0.0
    for index, array in enumerate(arrays):
        numeric = np.zeros_like(array)
        for position in np.ndindex(array.shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[index][position] += step
            minus[index][position] -= step
            numeric[position] = (evaluate(plus) - evaluate(minus)) / (2.0 * step)
        if array.size:
            worst = max(worst, float(relative_error(analytic[index], numeric).max()))
    return GradCheckReport(op=op, max_relative_error=worst, tolerance=tolerance)
