"""Segmentation metrics: IoU, mIoU, low-resolution mIoU, isolated pixel rate, pixel accuracy."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CONNECTIVITY = {
    4: ((-1, 0), (1, 0), (0, -1), (0, 1)),
    8: ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)),
}


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"Prediction shape {pred.shape} does not match ground truth shape {gt.shape}.")
    return pred, gt


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> np.ndarray:
    """counts[gt class, pred class]"""
    pred, gt = _check_pair(pred, gt)
    for name, values in (("prediction", pred), ("ground truth", gt)):
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise ValueError(f"The {name} holds classes outside [0, {num_classes}).")
    flat = num_classes * gt.astype(np.int64).ravel() + pred.astype(np.int64).ravel()
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


@dataclass
class IoUResult:
    per_class: np.ndarray
    """IoU per class, NaN where the class is absent from both maps"""
    miou: float

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.per_class)


def iou_from_confusion(confusion: np.ndarray, absent_as_one: bool = False) -> IoUResult:
    intersection = np.diag(confusion).astype(np.float64)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - intersection
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(union > 0, intersection / union, np.nan)
    if absent_as_one:
        scores = np.where(np.isnan(per_class), 1.0, per_class)
        return IoUResult(per_class, float(scores.mean()))
    defined = per_class[~np.isnan(per_class)]
    return IoUResult(per_class, float(defined.mean()) if defined.size else float("nan"))


def iou(pred: np.ndarray, gt: np.ndarray, num_classes: int | None = None, absent_as_one: bool = False) -> IoUResult:
    """per-class IoU and their mean over classes present in either map

    :param num_classes: defaults to one more than the largest id in either map
    :param absent_as_one: count classes absent from both maps as IoU 1 in the mean
    """
    pred, gt = _check_pair(pred, gt)
    if num_classes is None:
        num_classes = int(max(pred.max(initial=0), gt.max(initial=0))) + 1
    return iou_from_confusion(confusion_matrix(pred, gt, num_classes), absent_as_one)


def isolated_mask(label: np.ndarray, connectivity: int = 4) -> np.ndarray:
    """True where no neighbor shares the pixel's label; border pixels only look at existing neighbors"""
    label = np.asarray(label)
    if connectivity not in CONNECTIVITY:
        raise ValueError(f"Connectivity must be 4 or 8. Got {connectivity}.")
    if label.ndim != 2 or label.size == 0:
        raise ValueError(f"Isolation needs a nonempty H x W map. Got shape {label.shape}.")
    height, width = label.shape
    same = np.zeros(label.shape, dtype=bool)
    for dr, dc in CONNECTIVITY[connectivity]:
        rows = slice(max(dr, 0), height + min(dr, 0))
        cols = slice(max(dc, 0), width + min(dc, 0))
        shifted_rows = slice(max(-dr, 0), height + min(-dr, 0))
        shifted_cols = slice(max(-dc, 0), width + min(-dc, 0))
        same[shifted_rows, shifted_cols] |= label[shifted_rows, shifted_cols] == label[rows, cols]
    return ~same


def ipr(label: np.ndarray, connectivity: int = 4) -> float:
    """isolated pixel rate in percent"""
    mask = isolated_mask(label, connectivity)
    return 100.0 * float(mask.sum()) / mask.size


def low_res_miou(pred_low: np.ndarray, gt_low: np.ndarray, num_classes: int | None = None) -> float:
    return iou(pred_low, gt_low, num_classes).miou


def pixel_accuracy(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _check_pair(pred, gt)
    return float((pred == gt).mean())


@dataclass
class MetricsReport:
    per_class_iou: np.ndarray
    """NaN marks a class absent from predictions and ground truth"""
    miou: float
    low_res_miou: float
    ipr: float
    """percent"""
    pixel_accuracy: float
    class_names: Sequence[str] = field(default=())

    def __post_init__(self):
        if not self.class_names:
            self.class_names = tuple(f"class_{c}" for c in range(len(self.per_class_iou)))

    def summary(self) -> dict[str, float]:
        return {
            "miou": self.miou, "low_res_miou": self.low_res_miou, "ipr": self.ipr,
            "pixel_accuracy": self.pixel_accuracy,
        }

    def to_frame(self) -> pd.DataFrame:
        """one row per class plus the summary rows

        Results:
                            value  present
            metric
            iou.background   0.98     True
            ...
            miou             0.71     True
        """
        rows = {
            f"iou.{name}": {"value": value, "present": not np.isnan(value)}
            for name, value in zip(self.class_names, self.per_class_iou)
        }
        rows.update({name: {"value": value, "present": True} for name, value in self.summary().items()})
        frame = pd.DataFrame.from_dict(rows, orient="index")
        frame.index.names = ["metric"]
        return frame

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path)
        return path

    def to_table(self) -> str:
        frame = self.to_frame()
        frame["value"] = frame["value"].map(lambda v: "absent" if np.isnan(v) else f"{v:.4f}")
        return frame[["value"]].to_string()

    @classmethod
    def from_csv(cls, path: str | Path) -> "MetricsReport":
        frame = pd.read_csv(path, index_col="metric", float_precision="round_trip")
        per_class = frame.loc[frame.index.str.startswith("iou."), "value"]
        return cls(
            per_class_iou=per_class.to_numpy(dtype=np.float64),
            miou=float(frame.loc["miou", "value"]),
            low_res_miou=float(frame.loc["low_res_miou", "value"]),
            ipr=float(frame.loc["ipr", "value"]),
            pixel_accuracy=float(frame.loc["pixel_accuracy", "value"]),
            class_names=tuple(name.removeprefix("iou.") for name in per_class.index),
        )


def evaluate_dataset(
        predictions: Iterable[tuple[np.ndarray, np.ndarray]],
        targets: Iterable[tuple[np.ndarray, np.ndarray]],
        num_classes: int,
        connectivity: int = 4,
        class_names: Sequence[str] = (),
) -> MetricsReport:
    """accumulates confusion matrices over a dataset

    :param predictions: (high, low) predicted index maps per sample
    :param targets: (high, low) ground-truth index maps per sample
    """
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    confusion_low = np.zeros_like(confusion)
    isolated, pixels, maps = 0, 0, 0
    for (pred, pred_low), (gt, gt_low) in zip(predictions, targets, strict=True):
        confusion += confusion_matrix(pred, gt, num_classes)
        confusion_low += confusion_matrix(pred_low, gt_low, num_classes)
        mask = isolated_mask(pred, connectivity)
        isolated += int(mask.sum())
        pixels += mask.size
        maps += 1
    if maps == 0:
        raise ValueError("evaluate_dataset needs at least one prediction.")

    high = iou_from_confusion(confusion)
    return MetricsReport(
        per_class_iou=high.per_class,
        miou=high.miou,
        low_res_miou=iou_from_confusion(confusion_low).miou,
        ipr=100.0 * isolated / pixels,
        pixel_accuracy=float(np.trace(confusion)) / float(confusion.sum()),
        class_names=tuple(class_names),
    )
