from dataclasses import dataclass, field
from typing import Any, TypeVar

import numpy as np

from mman.data.labels import is_one_hot, to_index


@dataclass
class Sample:
    image: np.ndarray
    """3 x H x W, mean-subtracted"""
    label: np.ndarray
    """one-hot C x H x W"""
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ValueError(f"A sample image is 3 x H x W. Got shape {self.image.shape}.")
        if self.label.ndim != 3 or self.label.shape[1:] != self.image.shape[1:]:
            raise ValueError(f"Label shape {self.label.shape} does not match image shape {self.image.shape}.")
        if not np.all(np.isfinite(self.image)):
            raise ValueError("Sample image has non-finite values.")
        if not is_one_hot(self.label):
            raise ValueError("Sample label is not one-hot.")

    @property
    def num_classes(self) -> int:
        return self.label.shape[0]

    @property
    def extent(self) -> tuple[int, int]:
        return self.image.shape[1], self.image.shape[2]

    @property
    def index(self) -> np.ndarray:
        return to_index(self.label)


SampleType = TypeVar('SampleType', bound=Sample)
"""Object type Sample"""
