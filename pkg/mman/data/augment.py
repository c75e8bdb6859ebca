"""Training-time augmentation: shorter-side resize, random crop, flip with class swap,
mean subtraction."""
import numpy as np

from mman.config import DataConfig
from mman.data.labels import resize_nearest, to_index, to_one_hot
from mman.data.sample import Sample
from mman.src.ops import interpolation_matrix


def resize_image(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """bilinear resize of a C x H x W array, half-pixel centers"""
    if tuple(size) == image.shape[1:]:
        return image
    rows = interpolation_matrix(image.shape[1], size[0], dtype=image.dtype)
    cols = interpolation_matrix(image.shape[2], size[1], dtype=image.dtype)
    return np.einsum("oh,chw,pw->cop", rows, image, cols)


def shorter_side_extent(extent: tuple[int, int], shorter: int) -> tuple[int, int]:
    height, width = extent
    if height <= width:
        return shorter, int(round(width * shorter / height))
    return int(round(height * shorter / width)), shorter


def flip_sample(sample: Sample, swap: np.ndarray) -> Sample:
    """mirror left-right and relabel each paired left/right class"""
    if len(swap) != sample.num_classes:
        raise ValueError(f"Swap table covers {len(swap)} classes, the sample has {sample.num_classes}.")
    index = swap[to_index(sample.label)[:, ::-1]]
    image = sample.image[:, :, ::-1].copy()
    meta = {**sample.meta, "flipped": not sample.meta.get("flipped", False)}
    return Sample(image=image, label=to_one_hot(index, sample.num_classes, dtype=sample.label.dtype), meta=meta)


def subtract_mean(image: np.ndarray) -> np.ndarray:
    return image - image.mean(axis=(1, 2), keepdims=True)


def augment(sample: Sample, config: DataConfig, rng: np.random.Generator, swap: np.ndarray | None = None) -> Sample:
    """resize shorter side -> random crop -> optional flip -> mean subtraction

    The label map follows every geometric step with nearest-neighbor sampling, so it stays one-hot.

    :param config: supplies `resize_short`, `crop` and `flip`
    :param rng: stream for crop offsets and the flip coin
    :param swap: left/right class lookup used when flipping
    """
    size = shorter_side_extent(sample.extent, config.resize_short)
    if config.crop > min(size):
        raise ValueError(f"Crop {config.crop} is larger than the resized {size[0]}x{size[1]} image.")
    image = resize_image(sample.image, size)
    index = resize_nearest(to_index(sample.label), size)

    top = int(rng.integers(0, size[0] - config.crop + 1))
    left = int(rng.integers(0, size[1] - config.crop + 1))
    image = image[:, top:top + config.crop, left:left + config.crop]
    index = index[top:top + config.crop, left:left + config.crop]
    out = Sample(
        image=image.copy(),
        label=to_one_hot(index, sample.num_classes, dtype=sample.label.dtype),
        meta={**sample.meta, "crop": (top, left)},
    )

    if config.flip and rng.random() < 0.5:
        if swap is None:
            raise ValueError("Flipping needs a left/right swap table.")
        out = flip_sample(out, swap)
    out.image = subtract_mean(out.image)
    return out
