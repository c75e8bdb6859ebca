"""Inference: single-scale prediction, multi-scale averaging, dataset evaluation."""
import logging
from typing import Sequence

import numpy as np

from mman.data.labels import DESK_CLASSES, low_res_target, to_index
from mman.data.sample import Sample
from mman.metrics.segmentation import MetricsReport, evaluate_dataset
from mman.models.generator import STRIDE_PRODUCT, DualOutputGenerator, GeneratorOutput
from mman.src import ops
from mman.src.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


def _param_dtype(g: DualOutputGenerator) -> np.dtype:
    return g.parameters()[0].dtype


def predict(g: DualOutputGenerator, image: np.ndarray | Tensor) -> GeneratorOutput:
    """inference-mode forward without building a graph; the generator's mode is restored after"""
    previous = g.training
    g.eval()
    try:
        with no_grad():
            if not isinstance(image, Tensor):
                image = Tensor(np.asarray(image, dtype=_param_dtype(g)))
            return g(image)
    finally:
        g.train(previous)


def legal_extent(extent: int, scale: float) -> int | None:
    """scaled extent snapped to the nearest positive multiple of the stride product"""
    snapped = int(round(ops.scaled_extent(extent, scale) / STRIDE_PRODUCT)) * STRIDE_PRODUCT
    return snapped if snapped >= STRIDE_PRODUCT else None


def multi_scale_infer(g: DualOutputGenerator, image: np.ndarray | Tensor, scales: Sequence[float]) -> np.ndarray:
    """C x H x W class distribution averaged over scales

    Each scaled image is snapped to a legal extent, run through the generator, resized
    back to the native extent, then the maps are averaged and renormalized per pixel.
    Scales with no legal extent are skipped with a warning.
    """
    if not scales:
        raise ValueError("multi_scale_infer needs at least one scale.")
    if not isinstance(image, Tensor):
        image = Tensor(np.asarray(image, dtype=_param_dtype(g)))
    if image.ndim == 3:
        image = image.reshape(1, *image.shape)
    height, width = image.shape[2:]

    total, used = None, 0
    for scale in scales:
        if scale <= 0:
            raise ValueError(f"Scales must be positive. Got {scale}.")
        size = (legal_extent(height, scale), legal_extent(width, scale))
        if None in size:
            logger.warning(f"scale {scale} has no legal extent for a {height}x{width} image, skipping")
            continue
        with no_grad():
            scaled = ops.resize_bilinear(image, size=size)
            high = predict(g, scaled).high
            high = ops.resize_bilinear(high, size=(height, width))
        total = high.data if total is None else total + high.data
        used += 1
    if total is None:
        raise ValueError(f"None of the scales {tuple(scales)} gives a legal extent for a {height}x{width} image.")
    averaged = total[0] / used
    return averaged / averaged.sum(axis=0, keepdims=True)


def evaluate_models(
        g: DualOutputGenerator,
        samples: Sequence[Sample],
        scales: Sequence[float] = (1.0,),
        low_res_rule: str = "majority",
        connectivity: int = 4,
) -> MetricsReport:
    """MetricsReport of a generator over samples: multi-scale high-resolution maps and native low-resolution maps"""
    if not samples:
        raise ValueError("evaluate_models needs at least one sample.")
    num_classes = samples[0].num_classes
    predictions, targets = [], []
    for sample in samples:
        high = multi_scale_infer(g, sample.image, scales)
        low = predict(g, sample.image).low.data[0]
        predictions.append((to_index(high), to_index(low)))
        targets.append((sample.index, to_index(low_res_target(sample.label, STRIDE_PRODUCT, low_res_rule))))
    names = DESK_CLASSES if num_classes == len(DESK_CLASSES) else ()
    return evaluate_dataset(predictions, targets, num_classes, connectivity, names)
