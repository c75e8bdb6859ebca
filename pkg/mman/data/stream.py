"""Ordered stream of training items.

Every item's randomness comes from (seed, epoch, index), so the stream is the same
whether items are prepared inline or ahead of time on worker threads.
"""
import logging
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from mman.config import DataConfig
from mman.data.augment import augment
from mman.data.labels import low_res_target
from mman.data.sample import Sample
from mman.models.generator import STRIDE_PRODUCT

logger = logging.getLogger(__name__)


@dataclass
class TrainingItem:
    iteration: int
    epoch: int
    index: int
    """position of the sample in the dataset"""
    image: np.ndarray
    y: np.ndarray
    y_low: np.ndarray


class SampleStream:
    def __init__(
            self,
            samples: list[Sample],
            config: DataConfig,
            seed: int,
            swap: np.ndarray,
            workers: int = 0,
            dtype=np.float32,
    ):
        """
        :param samples: the training set
        :param config: augmentation and low-resolution target settings
        :param seed: run seed; drives the per-epoch order and every augmentation draw
        :param swap: left/right class lookup for flips
        :param workers: threads preparing items ahead; 0 prepares inline
        """
        if not samples:
            raise ValueError("A sample stream needs at least one sample.")
        if workers < 0:
            raise ValueError(f"`workers` must be nonnegative. Got {workers}.")
        self.samples = samples
        self.config = config
        self.seed = seed
        self.swap = swap
        self.workers = workers
        self.dtype = dtype

    def __len__(self):
        return len(self.samples)

    def epoch_order(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(len(self.samples))

    def prepare(self, iteration: int) -> TrainingItem:
        epoch, position = divmod(iteration, len(self.samples))
        index = int(self.epoch_order(epoch)[position])
        sample = self.samples[index]
        if self.config.augment:
            sample = augment(sample, self.config, np.random.default_rng([self.seed, epoch, index, 1]), self.swap)
        y = sample.label.astype(self.dtype)
        return TrainingItem(
            iteration=iteration,
            epoch=epoch,
            index=index,
            image=sample.image.astype(self.dtype),
            y=y,
            y_low=low_res_target(y, STRIDE_PRODUCT, self.config.low_res_rule),
        )

    def iterate(self, start: int, stop: int) -> Iterator[TrainingItem]:
        """items for iterations [start, stop), in order"""
        if self.workers == 0:
            for iteration in range(start, stop):
                yield self.prepare(iteration)
            return

        depth = 2 * self.workers
        with ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="mman-data") as pool:
            pending: deque[Future] = deque()
            upcoming = iter(range(start, stop))
            for iteration in upcoming:
                pending.append(pool.submit(self.prepare, iteration))
                if len(pending) >= depth:
                    break
            while pending:
                item = pending.popleft().result()
                next_iteration = next(upcoming, None)
                if next_iteration is not None:
                    pending.append(pool.submit(self.prepare, next_iteration))
                yield item
