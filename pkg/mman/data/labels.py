"""Label maps: index/one-hot conversion, raster I/O, low-resolution targets,
taxonomy merging and left/right swap tables.

An index map is an H x W integer array; a one-hot map is C x H x W with exactly one
1 per pixel.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from mman.config import read_key_values, resolve_config_path

logger = logging.getLogger(__name__)

DESK_CLASSES = ("background", "head", "torso", "left_arm", "right_arm", "left_leg", "right_leg")
DESK_SWAP_PAIRS = ((3, 4), (5, 6))
LIP_SWAP_PAIRS = ((14, 15), (16, 17), (18, 19))


def to_one_hot(index_map: np.ndarray, num_classes: int, dtype=np.float64) -> np.ndarray:
    index_map = np.asarray(index_map)
    if index_map.ndim != 2:
        raise ValueError(f"An index map is H x W. Got shape {index_map.shape}.")
    if index_map.size and (index_map.min() < 0 or index_map.max() >= num_classes):
        raise ValueError(f"Index map holds classes outside [0, {num_classes}).")
    return (np.arange(num_classes)[:, None, None] == index_map[None]).astype(dtype)


def to_index(label: np.ndarray) -> np.ndarray:
    """argmax over the class axis; ties go to the lowest class id"""
    label = np.asarray(label)
    if label.ndim < 3:
        raise ValueError(f"A class map has a channel axis. Got shape {label.shape}.")
    return label.argmax(axis=-3).astype(np.int64)


def is_one_hot(label: np.ndarray) -> bool:
    label = np.asarray(label)
    return bool(np.all((label == 0) | (label == 1)) and np.all(label.sum(axis=-3) == 1))


def low_res_target(y: np.ndarray, factor: int = 16, rule: str = "majority") -> np.ndarray:
    """one-hot C x H/f x W/f target for the low-resolution head

    :param y: one-hot C x H x W
    :param factor: block side
    :param rule: `majority` (block vote, ties to the lowest class id) or `nearest` (block center)
    """
    y = np.asarray(y)
    channels, height, width = y.shape
    if height % factor or width % factor:
        raise ValueError(f"A {height}x{width} map does not divide into {factor}x{factor} blocks.")
    match rule:
        case "majority":
            counts = y.reshape(channels, height // factor, factor, width // factor, factor).sum(axis=(2, 4))
            winners = counts.argmax(axis=0)
        case "nearest":
            winners = to_index(y)[factor // 2::factor, factor // 2::factor]
        case _:
            raise ValueError(f"Unknown low-resolution rule `{rule}`. Expected `majority` or `nearest`.")
    return to_one_hot(winners, channels, dtype=y.dtype)


def upsample_nearest(index_map: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(np.repeat(np.asarray(index_map), factor, axis=0), factor, axis=1)


def resize_nearest(index_map: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """nearest-neighbor resize on half-pixel centers"""
    height, width = index_map.shape
    rows = np.minimum(((np.arange(size[0]) + 0.5) * height / size[0]).astype(np.int64), height - 1)
    cols = np.minimum(((np.arange(size[1]) + 0.5) * width / size[1]).astype(np.int64), width - 1)
    return index_map[rows[:, None], cols[None, :]]


# ==== raster I/O ====
def save_label_image(index_map: np.ndarray, path: str | Path) -> Path:
    """writes an 8-bit single-channel PNG"""
    if isinstance(path, str):
        path = Path(path)
    index_map = np.asarray(index_map)
    if index_map.ndim != 2:
        raise ValueError(f"Only H x W index maps can be saved. Got shape {index_map.shape}.")
    if index_map.size and (index_map.min() < 0 or index_map.max() > 255):
        raise ValueError("Class ids must fit into 8 bits.")
    Image.fromarray(index_map.astype(np.uint8)).save(path)
    return path


def load_label_image(path: str | Path, num_classes: int) -> np.ndarray:
    """reads an 8-bit single-channel raster into an index map

    Raises ValueError naming the first pixel (row, col) whose value is not below num_classes.
    """
    if isinstance(path, str):
        path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Label image `{path}` does not exist.")
    with Image.open(path) as image:
        if image.mode not in ("L", "P"):
            raise ValueError(f"`{path.name}` is a {image.mode} image; label images are 8-bit single-channel.")
        index_map = np.array(image, dtype=np.int64)
    offending = np.argwhere(index_map >= num_classes)
    if len(offending):
        row, col = offending[0]
        raise ValueError(
            f"`{path.name}` has class {index_map[row, col]} at pixel (row {row}, col {col}); "
            f"expected values below {num_classes}."
        )
    return index_map


def save_image(image: np.ndarray, path: str | Path) -> Path:
    """3 x H x W float image in [0, 1] -> 8-bit RGB PNG"""
    if isinstance(path, str):
        path = Path(path)
    pixels = np.clip(np.round(np.asarray(image).transpose(1, 2, 0) * 255), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path)
    return path


def load_image(path: str | Path) -> np.ndarray:
    """RGB raster -> 3 x H x W float64 in [0, 1]"""
    if isinstance(path, str):
        path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image `{path}` does not exist.")
    with Image.open(path) as image:
        pixels = np.array(image.convert("RGB"), dtype=np.float64) / 255.0
    return pixels.transpose(2, 0, 1)


# ==== taxonomy merging ====
@dataclass(frozen=True)
class TaxonomyMap:
    source_classes: int
    target_classes: int
    table: tuple[int, ...]
    """table[source id] = target id"""

    def __post_init__(self):
        if len(self.table) != self.source_classes:
            missing = list(range(len(self.table), self.source_classes))
            raise ValueError(f"Taxonomy maps {len(self.table)} of {self.source_classes} source classes. Unmapped: {missing}.")
        used = set(self.table)
        if used != set(range(self.target_classes)):
            raise ValueError(
                f"Taxonomy targets must be exactly 0..{self.target_classes - 1}. Got {sorted(used)}."
            )

    @classmethod
    def identity(cls, num_classes: int) -> "TaxonomyMap":
        return cls(num_classes, num_classes, tuple(range(num_classes)))

    @classmethod
    def from_mapping(cls, mapping: dict[int, int]) -> "TaxonomyMap":
        if not mapping:
            raise ValueError("A taxonomy needs at least one source class.")
        source_classes = max(mapping) + 1
        unmapped = [c for c in range(source_classes) if c not in mapping]
        if unmapped:
            raise ValueError(f"Taxonomy leaves source classes {unmapped} unmapped.")
        table = tuple(int(mapping[c]) for c in range(source_classes))
        return cls(source_classes, max(table) + 1, table)

    @classmethod
    def from_file(cls, path: str | Path) -> "TaxonomyMap":
        """`source = target` lines, one per source class"""
        values = read_key_values(path)
        try:
            mapping = {int(k): int(v) for k, v in values.items()}
        except ValueError:
            raise ValueError(f"Taxonomy file `{path}` must map integers to integers.") from None
        return cls.from_mapping(mapping)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64)


def merge_taxonomy(index_map: np.ndarray, taxonomy: TaxonomyMap) -> np.ndarray:
    index_map = np.asarray(index_map)
    if index_map.size and (index_map.min() < 0 or index_map.max() >= taxonomy.source_classes):
        raise ValueError(f"Map holds classes outside the taxonomy's {taxonomy.source_classes} source classes.")
    return taxonomy.as_array()[index_map]


# ==== left/right swap ====
def swap_table(num_classes: int, pairs: tuple[tuple[int, int], ...] = ()) -> np.ndarray:
    """class lookup exchanging each (a, b) pair; the result is its own inverse"""
    table = np.arange(num_classes)
    seen: set[int] = set()
    for a, b in pairs:
        if a == b or a in seen or b in seen:
            raise ValueError(f"Swap pairs must be disjoint pairs of distinct classes. Got {pairs}.")
        if not (0 <= a < num_classes and 0 <= b < num_classes):
            raise ValueError(f"Swap pair ({a}, {b}) is outside [0, {num_classes}).")
        table[a], table[b] = b, a
        seen.update((a, b))
    return table


def load_swap_table(path: str | Path, num_classes: int) -> np.ndarray:
    """`a = b` lines, one per left/right pair"""
    values = read_key_values(path)
    try:
        pairs = tuple((int(k), int(v)) for k, v in values.items())
    except ValueError:
        raise ValueError(f"Swap file `{path}` must pair integers with integers.") from None
    return swap_table(num_classes, pairs)


def default_swap_table(num_classes: int) -> np.ndarray:
    match num_classes:
        case 7:
            return swap_table(7, DESK_SWAP_PAIRS)
        case 20:
            return swap_table(20, LIP_SWAP_PAIRS)
    logger.warning(f"No left/right swap table known for {num_classes} classes, flipping without a swap")
    return swap_table(num_classes)


def swap_for(num_classes: int, swap_file: str | Path | None = None) -> np.ndarray:
    """swap table from a config file (path or packaged name), else the built-in one"""
    if swap_file:
        return load_swap_table(resolve_config_path(swap_file), num_classes)
    return default_swap_table(num_classes)
