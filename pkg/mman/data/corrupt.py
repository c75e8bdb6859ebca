"""Controlled label-map defects for checking the consistency metrics.

`holes` plants small foreign-class blobs (local inconsistency); `limb_swap` exchanges
the lower halves of the two arms (semantic inconsistency).
"""
import logging

import numpy as np

logger = logging.getLogger(__name__)

KINDS = ("holes", "limb_swap")
ARM_PAIR = (3, 4)

_OFFSETS_4 = [(-1, 0), (1, 0), (0, -1), (0, 1)]
_OFFSETS_8 = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def _neighbor_labels(label: np.ndarray, row: int, col: int) -> set[int]:
    height, width = label.shape
    return {
        int(label[row + dr, col + dc]) for dr, dc in _OFFSETS_8
        if 0 <= row + dr < height and 0 <= col + dc < width
    }


def _has_same_neighbor(label: np.ndarray, row: int, col: int) -> bool:
    height, width = label.shape
    return any(
        label[row + dr, col + dc] == label[row, col] for dr, dc in _OFFSETS_4
        if 0 <= row + dr < height and 0 <= col + dc < width
    )


def _holes(label: np.ndarray, n: int, radius: int, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    """n blobs of the pixels closer than `radius` to a center; radius 1 is a single pixel

    Centers are drawn among pixels that still have a same-label neighbor, and the new
    class differs from the center and every pixel around it, so each single-pixel hole
    adds at least one isolated pixel.
    """
    out = label.copy()
    height, width = out.shape
    rows, cols = np.mgrid[0:height, 0:width]
    for hole in range(n):
        candidates = [(r, c) for r, c in np.ndindex(out.shape) if _has_same_neighbor(out, r, c)]
        placed = False
        for i in rng.permutation(len(candidates)):
            row, col = candidates[i]
            blocked = _neighbor_labels(out, row, col) | {int(out[row, col])}
            choices = [c for c in range(num_classes) if c not in blocked]
            if not choices:
                continue
            disc = (rows - row) ** 2 + (cols - col) ** 2 < radius ** 2
            out[disc] = choices[int(rng.integers(len(choices)))]
            placed = True
            break
        if not placed:
            logger.warning(f"no room for hole {hole + 1} of {n}, stopping early")
            break
    return out


def _limb_swap(label: np.ndarray, pair: tuple[int, int], torso: int) -> np.ndarray:
    """relabels the k pixels of each arm farthest from the torso as the other arm, k = half the smaller arm"""
    first, second = pair
    out = label.copy()
    torso_pixels = np.argwhere(label == torso)
    anchor = torso_pixels.mean(axis=0) if len(torso_pixels) else np.array(label.shape) / 2
    arms = {c: np.argwhere(label == c) for c in pair}
    k = min(len(arms[first]), len(arms[second])) // 2
    if k == 0:
        logger.warning(f"classes {pair} are not both present, limb_swap leaves the map unchanged")
        return out
    for source, target in ((first, second), (second, first)):
        pixels = arms[source]
        distance = np.linalg.norm(pixels - anchor, axis=1)
        distal = pixels[np.argsort(-distance, kind="stable")[:k]]
        out[distal[:, 0], distal[:, 1]] = target
    return out


def corrupt_map(
        label: np.ndarray,
        kind: str,
        seed: int = 0,
        *,
        n: int = 5,
        radius: int = 1,
        num_classes: int | None = None,
        pair: tuple[int, int] = ARM_PAIR,
        torso: int = 2,
) -> np.ndarray:
    """returns a corrupted copy of an H x W index map

    :param kind: `holes` or `limb_swap`
    :param seed: seeds the hole placement
    :param n: hole count
    :param radius: hole radius in pixels
    :param num_classes: classes a hole may take (defaults to max label + 1, at least 2)
    :param pair: the two classes limb_swap exchanges
    """
    label = np.asarray(label)
    if label.ndim != 2 or label.size == 0:
        raise ValueError(f"corrupt_map needs a nonempty H x W index map. Got shape {label.shape}.")
    match kind:
        case "holes":
            if n < 0:
                raise ValueError(f"Hole count must be nonnegative. Got {n}.")
            if radius < 1 or radius > max(label.shape):
                raise ValueError(f"Hole radius must lie in [1, {max(label.shape)}]. Got {radius}.")
            classes = num_classes if num_classes is not None else max(int(label.max()) + 1, 2)
            return _holes(label, n, radius, classes, np.random.default_rng(seed))
        case "limb_swap":
            return _limb_swap(label, pair, torso)
    raise ValueError(f"Unknown corruption `{kind}`. Expected one of {KINDS}.")
