from collections import Counter

import numpy as np

ORACLE_CASES = 1000


def random_pair(rng: np.random.Generator, max_side: int = 16, max_classes: int = 5) -> tuple[np.ndarray, np.ndarray, int]:
    """(pred, gt, num_classes) of random size; few classes so that neighbors often agree"""
    height, width = rng.integers(1, max_side + 1, size=2)
    num_classes = int(rng.integers(1, max_classes + 1))
    pred = rng.integers(0, num_classes, size=(height, width))
    gt = rng.integers(0, num_classes, size=(height, width))
    return pred, gt, num_classes


def brute_miou(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> float:
    scores = []
    for c in range(num_classes):
        union = int(((pred == c) | (gt == c)).sum())
        if union:
            scores.append(int(((pred == c) & (gt == c)).sum()) / union)
    return sum(scores) / len(scores) if scores else float("nan")


def brute_isolated_count(label: np.ndarray, connectivity: int) -> int:
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    height, width = label.shape
    count = 0
    for r in range(height):
        for c in range(width):
            neighbors = [
                label[r + dr, c + dc] for dr, dc in offsets if 0 <= r + dr < height and 0 <= c + dc < width
            ]
            if label[r, c] not in neighbors:
                count += 1
    return count


def brute_majority(index: np.ndarray, factor: int) -> np.ndarray:
    """block vote, ties to the lowest class id"""
    height, width = index.shape
    out = np.zeros((height // factor, width // factor), dtype=np.int64)
    for r in range(height // factor):
        for c in range(width // factor):
            block = index[r * factor:(r + 1) * factor, c * factor:(c + 1) * factor]
            counts = Counter(int(v) for v in block.ravel())
            best = max(counts.values())
            out[r, c] = min(k for k, v in counts.items() if v == best)
    return out
